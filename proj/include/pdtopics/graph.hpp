#pragma once

// Influence-weighted keyword co-occurrence graph. Edges come from unordered
// adjacent bigrams: each distinct pair counts at most once per post, scaled by
// the post weight and both endpoints' salience.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pdtopics/common.hpp"
#include "pdtopics/corpus.hpp"
#include "pdtopics/influence.hpp"

namespace pdtopics {

enum class SalienceMode { unit, capped_idf };

inline SalienceMode parse_salience_mode(std::string_view name) {
  if (name == "unit") return SalienceMode::unit;
  if (name == "capped_idf") return SalienceMode::capped_idf;
  throw ConfigError("unknown salience mode \"" + std::string(name) + "\" (expected unit or capped_idf)");
}

// Per-word salience: unit (ablation setting) or ln(N/df) capped from above.
// Boost factors multiply the listed words' scores.
inline Eigen::VectorXd compute_salience(const std::vector<TokenizedPost>& posts, const Vocabulary& vocab,
                                        SalienceMode mode, double cap = 3.0,
                                        const std::unordered_map<std::string, double>& boosts = {}) {
  const int v = vocab.size();
  Eigen::VectorXd s = Eigen::VectorXd::Ones(v);
  if (mode == SalienceMode::capped_idf) {
    if (cap <= 0) throw ConfigError("salience cap must be positive");
    Eigen::VectorXd df = Eigen::VectorXd::Zero(v);
    std::vector<char> seen(static_cast<std::size_t>(v));
    for (const auto& post : posts) {
      std::fill(seen.begin(), seen.end(), 0);
      for (const auto& t : post.tokens) {
        const int id = vocab.lookup(t);
        if (id >= 0 && !seen[static_cast<std::size_t>(id)]) {
          seen[static_cast<std::size_t>(id)] = 1;
          df[id] += 1.0;
        }
      }
    }
    const double n = static_cast<double>(posts.size());
    for (int i = 0; i < v; ++i) {
      s[i] = df[i] > 0 ? std::min(cap, std::log(n / df[i])) : cap;
    }
  }
  for (const auto& [word, factor] : boosts) {
    const int id = vocab.lookup(word);
    if (id >= 0) s[id] *= factor;
  }
  return s;
}

struct Edge {
  int i = 0;  // i < j always
  int j = 0;
  double w = 0.0;
};

struct CooccurrenceGraph {
  Vocabulary vocab;
  std::vector<Edge> edges;  // sorted by (i, j), weights > 0
  int vertex_count() const { return vocab.size(); }
  std::size_t nnz() const { return edges.size(); }
  double total_weight() const {
    double t = 0.0;
    for (const auto& e : edges) t += e.w;
    return t;
  }
  double mean_edge_weight() const { return edges.empty() ? 0.0 : total_weight() / static_cast<double>(edges.size()); }
  // Dense symmetric materialization; intended for small instances and tests.
  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(vertex_count(), vertex_count());
    for (const auto& e : edges) {
      w(e.i, e.j) = e.w;
      w(e.j, e.i) = e.w;
    }
    return w;
  }
};

struct GraphBuildOptions {
  bool zero_weight_fallback = true;  // all-zero weights: warn and use w = 1
};

// Builds W per edge weight s_i * s_j * sum_p w_p * [pair in post p]. Adjacent
// equal-index pairs are skipped; a pair contributes once per post regardless of
// repeats.
inline CooccurrenceGraph build_graph(const std::vector<TokenizedPost>& posts,
                                     const std::vector<InfluenceWeight>& weights, const Vocabulary& vocab,
                                     const Eigen::VectorXd& salience, const GraphBuildOptions& options = {},
                                     std::vector<std::string>* warnings = nullptr) {
  if (posts.size() != weights.size()) {
    throw DataError("build_graph: posts and weights differ in length (" + std::to_string(posts.size()) + " vs " +
                    std::to_string(weights.size()) + ")");
  }
  if (salience.size() != vocab.size()) throw DataError("build_graph: salience length does not match vocabulary");
  std::unordered_map<std::string, double> weight_of;
  weight_of.reserve(weights.size());
  bool any_positive = false;
  for (const auto& w : weights) {
    weight_of[w.post_id] = w.weight;
    any_positive = any_positive || w.weight > 0.0;
  }
  double fallback = 0.0;
  if (!any_positive) {
    if (!options.zero_weight_fallback) throw DataError("build_graph: all post weights are zero");
    if (warnings) warnings->push_back("all post weights are zero; falling back to uniform weights");
    fallback = 1.0;
  }

  std::map<std::pair<int, int>, double> acc;
  std::set<std::pair<int, int>> per_post;
  for (const auto& post : posts) {
    const auto it = weight_of.find(post.post_id);
    if (it == weight_of.end()) throw DataError("build_graph: no influence weight for post " + post.post_id);
    const double wp = fallback > 0.0 ? fallback : it->second;
    if (wp == 0.0 || post.tokens.size() < 2) continue;
    per_post.clear();
    for (std::size_t k = 0; k + 1 < post.tokens.size(); ++k) {
      const int a = vocab.lookup(post.tokens[k]);
      const int b = vocab.lookup(post.tokens[k + 1]);
      if (a < 0 || b < 0 || a == b) continue;
      per_post.emplace(std::min(a, b), std::max(a, b));
    }
    for (const auto& pair : per_post) acc[pair] += wp;
  }

  CooccurrenceGraph graph;
  graph.vocab = vocab;
  graph.edges.reserve(acc.size());
  for (const auto& [pair, sum] : acc) {
    const double w = salience[pair.first] * salience[pair.second] * sum;
    if (w > 0.0) graph.edges.push_back({pair.first, pair.second, w});
  }
  return graph;
}

// --- graph artifacts ---

inline void write_vocab(const Vocabulary& vocab, const std::string& path) {
  std::string out;
  for (const auto& w : vocab.entries) {
    out += w;
    out += '\n';
  }
  write_file(path, out);
}

inline Vocabulary read_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path + " (run `ingest` first)");
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    vocab.add(line);
  }
  if (vocab.size() == 0) throw DataError(path + ": empty vocabulary file");
  return vocab;
}

inline void write_edges_tsv(const CooccurrenceGraph& graph, const std::string& path) {
  std::string out = "# pdtopics.edges.v1\ni\tj\tweight\n";
  char buf[96];
  for (const auto& e : graph.edges) {
    std::snprintf(buf, sizeof(buf), "%d\t%d\t%.17g\n", e.i, e.j, e.w);
    out += buf;
  }
  write_file(path, out);
}

inline CooccurrenceGraph read_edges_tsv(const std::string& path, Vocabulary vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge file: " + path + " (run `graph` first)");
  CooccurrenceGraph graph;
  graph.vocab = std::move(vocab);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#' || t.starts_with("i\t")) continue;
    const auto parts = split(t, '\t');
    if (parts.size() != 3) throw DataError(path + ": line " + std::to_string(lineno) + ": expected i<TAB>j<TAB>weight");
    Edge e;
    try {
      e.i = std::stoi(parts[0]);
      e.j = std::stoi(parts[1]);
      e.w = std::stod(parts[2]);
    } catch (const std::exception&) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": malformed edge row");
    }
    if (e.i < 0 || e.j <= e.i || e.j >= graph.vocab.size() || !(e.w > 0.0) || !std::isfinite(e.w)) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": invalid edge (" + std::string(t) + ")");
    }
    graph.edges.push_back(e);
  }
  std::sort(graph.edges.begin(), graph.edges.end(),
            [](const Edge& a, const Edge& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
  return graph;
}

inline nlohmann::json graph_summary(const CooccurrenceGraph& graph) {
  return {{"schema", "pdtopics.graph_summary.v1"},
          {"V", graph.vertex_count()},
          {"nnz", graph.nnz()},
          {"total_weight", graph.total_weight()}};
}

}  // namespace pdtopics
