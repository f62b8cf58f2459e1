// pdtopics command line: mines topics from social-media posts by weighting
// each post's influence, building a keyword co-occurrence graph, factorizing
// it, and reporting scored, ranked topics with event keywords.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdtopics/pdtopics.hpp"

namespace {

using pdtopics::PipelineConfig;

void add_io_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--out-dir", cfg.out_dir, "Artifact directory (stages chain through it)");
  // handled by expand_config_args before parsing; registered for --help only
  static std::string config_dummy;
  cmd->add_option("--config", config_dummy, "Flat key=value config file (keys are long flag names); flags win");
}

// Expands `--config FILE` into the equivalent long flags, inserted after the
// subcommand token. Keys already given explicitly on the command line win.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> raw(argv + 1, argv + argc);
  std::string config_path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == "--config" && i + 1 < raw.size()) {
      config_path = raw[++i];
    } else if (raw[i].rfind("--config=", 0) == 0) {
      config_path = raw[i].substr(9);
    } else {
      rest.push_back(raw[i]);
    }
  }
  if (config_path.empty()) return rest;
  std::vector<std::string> from_file;
  for (const auto& line : pdtopics::read_lines(config_path)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw pdtopics::ConfigError(config_path + ": expected key=value lines, got \"" + line + "\"");
    }
    const std::string key(pdtopics::trim(line.substr(0, eq)));
    const std::string value(pdtopics::trim(line.substr(eq + 1)));
    const std::string flag = "--" + key;
    bool overridden = false;
    for (const auto& a : rest) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        overridden = true;
        break;
      }
    }
    if (overridden) continue;
    if (value == "true") {
      from_file.push_back(flag);
    } else if (value != "false") {
      from_file.push_back(flag + "=" + value);
    }
  }
  std::vector<std::string> out;
  if (!rest.empty()) out.push_back(rest.front());  // subcommand first
  out.insert(out.end(), from_file.begin(), from_file.end());
  if (!rest.empty()) out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

void add_ingest_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--input", cfg.input_path, "Input posts file");
  cmd->add_option("--format", cfg.format, "Input format: jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
  cmd->add_option("--stopwords", cfg.stopwords_path, "Stop-word file, one word per line");
  cmd->add_option("--replacements", cfg.replacements_path, "Replacement file, variant<TAB>canonical per line");
  cmd->add_option("--protected", cfg.protected_path, "Protected terms, never split or dropped");
}

void add_influence_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--tau0", cfg.influence.tau0, "Time unit in hours");
  cmd->add_option("--eps-f", cfg.influence.eps_f, "Reach smoothing constant");
  cmd->add_option("--decay-g", cfg.influence.decay_g, "Decay exponent");
  cmd->add_option("--hn-shift", cfg.influence.hn_shift, "Decay shift constant");
}

void add_graph_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--salience", cfg.salience, "Word salience mode: unit or capped_idf")
      ->check(CLI::IsMember({"unit", "capped_idf"}));
  cmd->add_option("--cap", cfg.salience_cap, "Salience IDF cap");
  cmd->add_option("--boost-file", cfg.boost_path, "Domain boost file, word<TAB>factor per line");
  cmd->add_flag("--no-weights{false}", cfg.use_weights, "Build the graph with uniform post weights");
  cmd->add_flag("--plain-graph", [&cfg](std::int64_t) { cfg.use_weights = false; cfg.unit_salience = true; },
                "Uniform post weights and unit salience");
  cmd->add_flag("--no-zero-fallback{false}", cfg.zero_weight_fallback,
                "Fail instead of falling back to uniform weights when all weights are zero");
}

void add_solver_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--k", cfg.solver.k, "Topic count");
  cmd->add_option("--lambda-h", cfg.solver.lambda_h, "Residual L1 penalty (default 0.1 * mean edge weight)");
  cmd->add_option("--gamma", cfg.solver.gamma, "Decorrelation penalty weight");
  cmd->add_option("--rho", cfg.solver.rho, "ADMM penalty parameter");
  cmd->add_option("--tol", cfg.solver.tol, "Relative objective tolerance");
  cmd->add_option("--max-outer", cfg.solver.max_outer, "Outer iteration cap");
  cmd->add_option("--max-admm", cfg.solver.max_admm, "ADMM sweeps per outer iteration");
  cmd->add_option("--seed", cfg.solver.seed, "Random seed");
  cmd->add_option("--restarts", cfg.solver.restarts, "Restarts; best final objective wins");
  cmd->add_option("--decorr-step", cfg.solver.decorrelation_step, "Decorrelation step size");
  cmd->add_flag("--no-h{false}", cfg.solver.update_h, "Freeze the residual H at its initialization");
  cmd->add_flag("--no-gamma", [&cfg](std::int64_t) { cfg.solver.gamma = 0.0; }, "Drop the decorrelation penalty");
  cmd->add_flag("--cold-admm{false}", cfg.solver.warm_admm, "Reset ADMM state every outer iteration");
}

void add_metric_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--m", cfg.top_m, "Top words per topic for metrics and reports");
  cmd->add_option("--reference", cfg.reference, "NPMI reference: posts or graph")
      ->check(CLI::IsMember({"posts", "graph"}));
  cmd->add_option("--td-floor", cfg.td_floor, "Topic-diversity floor for K selection");
  cmd->add_option("--cv-window", cfg.cv_window, "Cv sliding-window length in tokens");
}

void add_report_flags(CLI::App* cmd, PipelineConfig& cfg) {
  cmd->add_option("--n-top-posts", cfg.n_top_posts, "Posts per topic mined for event keywords");
  cmd->add_option("--n-keywords", cfg.n_keywords, "Event keywords per topic");
  cmd->add_flag("--weighted-activity", cfg.weighted_activity, "Scale post-topic activity by a_k");
  cmd->add_option("--places", cfg.places_path, "Place-name filter file for event keywords");
  cmd->add_option("--sharpness-on", cfg.sharpness_on, "Sharpness source: dictionary or residual")
      ->check(CLI::IsMember({"dictionary", "residual"}));
}

void apply_preset(PipelineConfig& cfg, const std::string& preset) {
  if (preset == "full" || preset.empty()) return;
  if (preset == "no-h") {
    cfg.solver.update_h = false;
  } else if (preset == "no-gamma") {
    cfg.solver.gamma = 0.0;
  } else if (preset == "no-weights") {
    cfg.use_weights = false;
  } else if (preset == "plain-graph") {
    cfg.use_weights = false;
    cfg.unit_salience = true;
  } else {
    throw pdtopics::ConfigError("unknown preset: " + preset);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdtopics: influence-weighted keyword-graph topic miner"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  std::string preset = "full";
  std::string k_list_arg;

  auto* ingest = app.add_subcommand("ingest", "Parse, clean and tokenize posts; build the vocabulary");
  add_io_flags(ingest, cfg);
  add_ingest_flags(ingest, cfg);

  auto* weights = app.add_subcommand("weights", "Compute per-post influence weights");
  add_io_flags(weights, cfg);
  add_influence_flags(weights, cfg);

  auto* graph = app.add_subcommand("graph", "Build the influence-weighted co-occurrence graph");
  add_io_flags(graph, cfg);
  add_graph_flags(graph, cfg);

  auto* fit = app.add_subcommand("fit", "Factorize the graph at a fixed topic count");
  add_io_flags(fit, cfg);
  add_solver_flags(fit, cfg);

  auto* sweep = app.add_subcommand("sweep", "Fit across a K list and select by coherence");
  add_io_flags(sweep, cfg);
  add_solver_flags(sweep, cfg);
  add_metric_flags(sweep, cfg);
  sweep->add_option("--k-list", k_list_arg, "Comma-separated topic counts, e.g. 10,15,20");

  auto* report = app.add_subcommand("report", "Rank topics, assign posts, extract event keywords");
  add_io_flags(report, cfg);
  add_metric_flags(report, cfg);
  add_report_flags(report, cfg);
  report->add_option("--stopwords", cfg.stopwords_path, "Stop-word filter for event keywords");

  auto* all = app.add_subcommand("all", "Run the whole pipeline");
  add_io_flags(all, cfg);
  add_ingest_flags(all, cfg);
  add_influence_flags(all, cfg);
  add_graph_flags(all, cfg);
  add_solver_flags(all, cfg);
  add_metric_flags(all, cfg);
  add_report_flags(all, cfg);
  all->add_option("--k-list", k_list_arg, "Sweep these topic counts and fit the selected K");
  all->add_option("--preset", preset, "full, no-h, no-gamma, no-weights or plain-graph")
      ->check(CLI::IsMember({"full", "no-h", "no-gamma", "no-weights", "plain-graph"}));

  try {
    auto args = expand_config_args(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11's vector parse expects reversed args
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const pdtopics::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  }

  try {
    apply_preset(cfg, preset);
    if (!k_list_arg.empty()) {
      for (const auto& part : pdtopics::split(k_list_arg, ',')) {
        cfg.k_list.push_back(std::stoi(std::string(pdtopics::trim(part))));
      }
    }
    namespace pl = pdtopics::pipeline;
    if (ingest->parsed()) pl::run_ingest(cfg);
    if (weights->parsed()) pl::run_weights(cfg);
    if (graph->parsed()) pl::run_graph(cfg);
    if (fit->parsed()) pl::run_fit(cfg);
    if (sweep->parsed()) pl::run_sweep(cfg);
    if (report->parsed()) pl::run_report(cfg);
    if (all->parsed()) pl::run_all(cfg);
  } catch (const pdtopics::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
