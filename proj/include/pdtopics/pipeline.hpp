#pragma once

// End-to-end orchestration: each stage reads its upstream artifacts from the
// output directory and writes versioned artifacts back, so stages chain across
// processes. Timestamps live only in run_meta.json; everything else is a pure
// function of inputs, configuration and seed.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdtopics/common.hpp"
#include "pdtopics/corpus.hpp"
#include "pdtopics/graph.hpp"
#include "pdtopics/influence.hpp"
#include "pdtopics/metrics.hpp"
#include "pdtopics/mining.hpp"
#include "pdtopics/solver.hpp"

namespace pdtopics {

struct PipelineConfig {
  // inputs
  std::string input_path;
  std::string format = "jsonl";
  std::string out_dir = ".";
  std::string stopwords_path, replacements_path, protected_path, boost_path, places_path;
  // influence
  InfluenceParams influence;
  // graph
  std::string salience = "capped_idf";
  double salience_cap = 3.0;
  bool use_weights = true;       // false: w = 1 for every post
  bool unit_salience = false;    // true: s = 1 for every word
  bool zero_weight_fallback = true;
  // solver
  SolverConfig solver;
  // metrics
  std::vector<int> k_list;
  int top_m = 10;
  std::string reference = "posts";  // posts | graph
  double td_floor = 0.5;
  int cv_window = 110;
  std::string sharpness_on = "dictionary";  // dictionary | residual
  // mining
  int n_top_posts = 20;
  int n_keywords = 10;
  bool weighted_activity = false;

  nlohmann::json to_json() const {
    return {{"schema", "pdtopics.config.v1"},
            {"input_path", input_path},
            {"format", format},
            {"out_dir", out_dir},
            {"stopwords_path", stopwords_path},
            {"replacements_path", replacements_path},
            {"protected_path", protected_path},
            {"boost_path", boost_path},
            {"places_path", places_path},
            {"influence",
             {{"eps_f", influence.eps_f},
              {"tau0", influence.tau0},
              {"decay_g", influence.decay_g},
              {"hn_shift", influence.hn_shift}}},
            {"salience", salience},
            {"salience_cap", salience_cap},
            {"use_weights", use_weights},
            {"unit_salience", unit_salience},
            {"zero_weight_fallback", zero_weight_fallback},
            {"solver", solver_config_json(solver)},
            {"k_list", k_list},
            {"top_m", top_m},
            {"reference", reference},
            {"td_floor", td_floor},
            {"cv_window", cv_window},
            {"sharpness_on", sharpness_on},
            {"n_top_posts", n_top_posts},
            {"n_keywords", n_keywords},
            {"weighted_activity", weighted_activity}};
  }
};

namespace pipeline {

namespace fs = std::filesystem;

inline std::string artifact(const PipelineConfig& cfg, const char* name) {
  return (fs::path(cfg.out_dir) / name).string();
}

inline void ensure_out_dir(const PipelineConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

inline void require_artifact(const PipelineConfig& cfg, const char* name, const char* producer) {
  if (!fs::exists(fs::path(cfg.out_dir) / name)) {
    throw DataError(std::string("missing artifact ") + name + ": run `" + producer + "` first");
  }
}

// The exact configuration of every run sits next to its outputs; wall-clock
// metadata is quarantined in run_meta.json so artifacts stay byte-reproducible.
inline void write_run_config(const PipelineConfig& cfg, const std::string& subcommand) {
  nlohmann::json j = cfg.to_json();
  j["subcommand"] = subcommand;
  write_file(artifact(cfg, "run_config.json"), j.dump(2) + "\n");
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  nlohmann::json meta = {{"schema", "pdtopics.run_meta.v1"},
                         {"subcommand", subcommand},
                         {"written_at", format_rfc3339(static_cast<std::int64_t>(secs))}};
  write_file(artifact(cfg, "run_meta.json"), meta.dump(2) + "\n");
}

inline PreprocessOptions load_preprocess_options(const PipelineConfig& cfg) {
  PreprocessOptions opts;
  if (!cfg.stopwords_path.empty()) opts.stop_words = load_word_set(cfg.stopwords_path);
  if (!cfg.protected_path.empty()) opts.protected_terms = load_word_set(cfg.protected_path);
  if (!cfg.replacements_path.empty()) opts.replacements = load_replacements(cfg.replacements_path);
  return opts;
}

inline nlohmann::json post_to_json(const Post& p) {
  nlohmann::json j = {{"post_id", p.post_id},     {"timestamp", format_rfc3339(p.timestamp)},
                      {"text", p.text},           {"likes", p.likes},
                      {"comments", p.comments},   {"reposts", p.reposts},
                      {"followers", p.followers}, {"platform", p.platform}};
  if (p.comment_times) {
    nlohmann::json times = nlohmann::json::array();
    for (auto t : *p.comment_times) times.push_back(format_rfc3339(t));
    j["comment_times"] = std::move(times);
  }
  if (p.pre_tokens) j["tokens"] = *p.pre_tokens;
  return j;
}

inline void write_posts_jsonl(const std::vector<Post>& posts, const std::string& path) {
  std::string out = nlohmann::json{{"schema", "pdtopics.posts.v1"}}.dump() + "\n";
  for (const auto& p : posts) out += post_to_json(p).dump() + "\n";
  write_file(path, out);
}

inline void write_tokens_tsv(const std::vector<TokenizedPost>& posts, const std::string& path) {
  std::string out = "# pdtopics.tokens.v1\npost_id\ttokens\n";
  for (const auto& p : posts) {
    out += p.post_id;
    out += '\t';
    out += join(p.tokens, " ");
    out += '\n';
  }
  write_file(path, out);
}

inline std::vector<TokenizedPost> read_tokens_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tokens file: " + path + " (run `ingest` first)");
  std::vector<TokenizedPost> posts;
  std::string line;
  bool first_data = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (first_data && line.starts_with("post_id\t")) {
      first_data = false;
      continue;
    }
    first_data = false;
    const auto tab = line.find('\t');
    TokenizedPost p;
    p.post_id = line.substr(0, tab);
    if (tab != std::string::npos && tab + 1 < line.size()) {
      for (auto& t : split(line.substr(tab + 1), ' ')) {
        if (!t.empty()) p.tokens.push_back(std::move(t));
      }
    }
    posts.push_back(std::move(p));
  }
  return posts;
}

inline void write_weights_tsv(const std::vector<InfluenceWeight>& weights, const std::string& path) {
  std::string out = "# pdtopics.weights.v1\npost_id\titf\tiidf\tY\tmean_gap_hours\tw\n";
  char buf[256];
  for (const auto& w : weights) {
    std::snprintf(buf, sizeof(buf), "\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", w.itf, w.iidf, w.attention,
                  w.mean_gap_hours, w.weight);
    out += w.post_id;
    out += buf;
  }
  write_file(path, out);
}

inline std::vector<InfluenceWeight> read_weights_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open weights file: " + path + " (run `weights` first)");
  std::vector<InfluenceWeight> weights;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line.starts_with("post_id\t")) continue;
    const auto parts = split(line, '\t');
    if (parts.size() != 6) throw DataError(path + ": expected 6 tab-separated columns");
    InfluenceWeight w;
    w.post_id = parts[0];
    try {
      w.itf = std::stod(parts[1]);
      w.iidf = std::stod(parts[2]);
      w.attention = std::stod(parts[3]);
      w.mean_gap_hours = std::stod(parts[4]);
      w.weight = std::stod(parts[5]);
    } catch (const std::exception&) {
      throw DataError(path + ": malformed weight row for post " + w.post_id);
    }
    weights.push_back(std::move(w));
  }
  return weights;
}

// --- stages ---

inline void run_ingest(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  if (cfg.input_path.empty()) throw ConfigError("ingest: --input is required");
  const auto posts = ingest(cfg.input_path, parse_format(cfg.format));
  const auto prep = preprocess(posts, load_preprocess_options(cfg));
  write_posts_jsonl(posts, artifact(cfg, "posts.jsonl"));
  write_tokens_tsv(prep.posts, artifact(cfg, "tokens.tsv"));
  write_vocab(prep.vocab, artifact(cfg, "vocab.txt"));
  write_run_config(cfg, "ingest");
}

inline void run_weights(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  require_artifact(cfg, "posts.jsonl", "ingest");
  const auto posts = ingest(artifact(cfg, "posts.jsonl"), InputFormat::jsonl);
  const auto weights = compute_weights(posts, cfg.influence);
  long long imputed = 0;
  for (const auto& w : weights) imputed += w.pacing_imputed ? 1 : 0;
  if (imputed > 0) {
    std::fprintf(stderr, "note: %lld of %zu posts lack comment timestamps; pacing imputed from counts\n", imputed,
                 weights.size());
  }
  write_weights_tsv(weights, artifact(cfg, "weights.tsv"));
  write_run_config(cfg, "weights");
}

inline CooccurrenceGraph build_graph_stage(const PipelineConfig& cfg, std::vector<std::string>* warnings) {
  require_artifact(cfg, "tokens.tsv", "ingest");
  require_artifact(cfg, "vocab.txt", "ingest");
  const auto tokens = read_tokens_tsv(artifact(cfg, "tokens.tsv"));
  const auto vocab = read_vocab(artifact(cfg, "vocab.txt"));
  std::vector<InfluenceWeight> weights;
  if (cfg.use_weights) {
    require_artifact(cfg, "weights.tsv", "weights");
    weights = read_weights_tsv(artifact(cfg, "weights.tsv"));
  } else {
    for (const auto& p : tokens) {
      InfluenceWeight w;
      w.post_id = p.post_id;
      w.weight = 1.0;
      weights.push_back(std::move(w));
    }
  }
  Eigen::VectorXd salience;
  if (cfg.unit_salience) {
    salience = compute_salience(tokens, vocab, SalienceMode::unit);
  } else {
    std::unordered_map<std::string, double> boosts;
    if (!cfg.boost_path.empty()) {
      for (const auto& line : read_lines(cfg.boost_path)) {
        const auto parts = split(line, '\t');
        if (parts.size() != 2) throw DataError(cfg.boost_path + ": boost lines must be word<TAB>factor");
        boosts[parts[0]] = std::stod(parts[1]);
      }
    }
    salience = compute_salience(tokens, vocab, parse_salience_mode(cfg.salience), cfg.salience_cap, boosts);
  }
  GraphBuildOptions opts;
  opts.zero_weight_fallback = cfg.zero_weight_fallback;
  return build_graph(tokens, weights, vocab, salience, opts, warnings);
}

inline void run_graph(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  std::vector<std::string> warnings;
  const auto graph = build_graph_stage(cfg, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_vocab(graph.vocab, artifact(cfg, "vocab.txt"));
  write_edges_tsv(graph, artifact(cfg, "edges.tsv"));
  write_file(artifact(cfg, "graph_summary.json"), graph_summary(graph).dump(2) + "\n");
  write_run_config(cfg, "graph");
}

inline CooccurrenceGraph load_graph(const PipelineConfig& cfg) {
  require_artifact(cfg, "edges.tsv", "graph");
  require_artifact(cfg, "vocab.txt", "graph");
  return read_edges_tsv(artifact(cfg, "edges.tsv"), read_vocab(artifact(cfg, "vocab.txt")));
}

inline void run_fit(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  const auto graph = load_graph(cfg);
  const SolverConfig resolved = cfg.solver.resolved(graph);
  auto [model, trace] = fit(graph, resolved);
  for (const auto& w : trace.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_file(artifact(cfg, "model.json"),
             model_to_json(model, resolved, trace.entries.back().objective).dump() + "\n");
  write_file(artifact(cfg, "trace.csv"), trace_to_csv(trace));
  write_run_config(cfg, "fit");
}

inline void run_sweep(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  if (cfg.k_list.empty()) throw ConfigError("sweep: --k-list is required");
  const auto graph = load_graph(cfg);
  require_artifact(cfg, "tokens.tsv", "ingest");
  const auto tokens = read_tokens_tsv(artifact(cfg, "tokens.tsv"));
  SweepOptions opts;
  opts.m = cfg.top_m;
  opts.td_floor = cfg.td_floor;
  opts.graph_reference = cfg.reference == "graph";
  opts.cv_window = cfg.cv_window;
  const auto result = sweep_k(graph, tokens, cfg.k_list, cfg.solver.resolved(graph), opts);
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_file(artifact(cfg, "sweep.csv"), sweep_to_csv(result));
  const nlohmann::json sidecar = {{"schema", "pdtopics.sweep_selected.v1"},
                                  {"selected_k", result.selected_k},
                                  {"rule", "argmax NPMI subject to TD >= td_floor, ties toward smaller K"},
                                  {"td_floor", cfg.td_floor},
                                  {"floor_relaxed", result.floor_relaxed}};
  write_file(artifact(cfg, "sweep_selected.json"), sidecar.dump(2) + "\n");
  write_run_config(cfg, "sweep");
}

inline void run_report(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  require_artifact(cfg, "model.json", "fit");
  require_artifact(cfg, "tokens.tsv", "ingest");
  const auto graph = load_graph(cfg);
  const auto model = model_from_json(nlohmann::json::parse(read_file(artifact(cfg, "model.json"))));
  const auto tokens = read_tokens_tsv(artifact(cfg, "tokens.tsv"));

  const auto assignments = assign_posts(tokens, model, graph.vocab, cfg.weighted_activity);
  auto summaries = rank_topics(model, graph.vocab, cfg.top_m);
  KeywordFilters filters;
  if (!cfg.stopwords_path.empty()) filters.stop_words = load_word_set(cfg.stopwords_path);
  if (!cfg.places_path.empty()) filters.place_names = load_word_set(cfg.places_path);
  std::vector<std::string> warnings;
  for (auto& s : summaries) {
    s.event_keywords =
        event_keywords(assignments, tokens, s.topic_id, cfg.n_top_posts, cfg.n_keywords, filters, &warnings);
    for (const auto& a : assignments) {
      if (a.dominant == s.topic_id) ++s.n_assigned_posts;
    }
  }
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  std::string topics_out = "# pdtopics.topics.v1\nrank\ttopic_id\ta_k\ttop_words\n";
  char buf[160];
  for (std::size_t r = 0; r < summaries.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%zu\t%d\t%.17g\t", r + 1, summaries[r].topic_id, summaries[r].importance);
    topics_out += buf;
    topics_out += join(summaries[r].top_words, " ");
    topics_out += '\n';
  }
  write_file(artifact(cfg, "topics.tsv"), topics_out);

  std::string events_out = "# pdtopics.events.v1\ntopic_id\tkeyword\tcount\n";
  for (const auto& s : summaries) {
    for (const auto& kw : s.event_keywords) {
      std::snprintf(buf, sizeof(buf), "%d\t%s\t%lld\n", s.topic_id, kw.word.c_str(), kw.count);
      events_out += buf;
    }
  }
  write_file(artifact(cfg, "events.tsv"), events_out);

  std::string assign_out = "# pdtopics.assignments.v1\npost_id\tk_star\tmax_activity\n";
  for (const auto& a : assignments) {
    const double top = a.dominant >= 0 ? a.x[a.dominant] : 0.0;
    std::snprintf(buf, sizeof(buf), "\t%d\t%.17g\n", a.dominant, top);
    assign_out += a.post_id;
    assign_out += buf;
  }
  write_file(artifact(cfg, "assignments.tsv"), assign_out);

  // full metric report for the fitted model
  const auto topic_sets = top_topic_words(model, graph.vocab, cfg.top_m);
  std::vector<std::string> metric_warnings;
  const double npmi_mean = cfg.reference == "graph" ? npmi_graph(topic_sets, graph).mean
                                                    : npmi(topic_sets, build_corpus_cooc(tokens, graph.vocab),
                                                           graph.vocab).mean;
  const double cv_mean = cv(topic_sets, tokens, graph.vocab, CvOptions{cfg.cv_window}, &metric_warnings);
  const auto sharp = sharpness(model, {10, 25}, cfg.sharpness_on == "residual");
  nlohmann::json masses = nlohmann::json::object();
  for (const auto& [m, mass] : sharp.mean_topk_mass) masses[std::to_string(m)] = mass;
  const nlohmann::json metrics = {{"schema", "pdtopics.metrics.v1"},
                                  {"npmi", npmi_mean},
                                  {"cv", cv_mean},
                                  {"td", topic_diversity(topic_sets)},
                                  {"mean_entropy", sharp.mean_entropy},
                                  {"per_topic_entropy", sharp.per_topic_entropy},
                                  {"topk_mass", masses},
                                  {"cv_window", cfg.cv_window},
                                  {"cv_segmentation", "one-set, boolean sliding window, NPMI context vectors"},
                                  {"reference", cfg.reference},
                                  {"sharpness_on", cfg.sharpness_on}};
  write_file(artifact(cfg, "metrics.json"), metrics.dump(2) + "\n");
  write_run_config(cfg, "report");
}

// ingest -> weights -> graph -> (sweep | fit at fixed K) -> report.
inline void run_all(const PipelineConfig& cfg) {
  run_ingest(cfg);
  run_weights(cfg);
  run_graph(cfg);
  PipelineConfig staged = cfg;
  if (!cfg.k_list.empty()) {
    run_sweep(cfg);
    const auto sidecar = nlohmann::json::parse(read_file(artifact(cfg, "sweep_selected.json")));
    staged.solver.k = sidecar.at("selected_k").get<int>();
  }
  run_fit(staged);
  run_report(staged);
  write_run_config(cfg, "all");
}

}  // namespace pipeline
}  // namespace pdtopics
