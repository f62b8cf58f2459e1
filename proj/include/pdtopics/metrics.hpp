#pragma once

// Topic quality metrics: NPMI coherence against post-level (or graph) word
// co-occurrence, the sliding-window Cv composite, topic diversity over top-m
// word lists, per-topic sharpness statistics, and the coherence-driven K sweep.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdtopics/common.hpp"
#include "pdtopics/corpus.hpp"
#include "pdtopics/graph.hpp"
#include "pdtopics/solver.hpp"

namespace pdtopics {

struct TopicWordSet {
  int topic_id = 0;
  std::vector<std::string> top_words;  // descending dictionary entry, unique
};

// Top-m words of each topic by descending u_{:k}; ties break toward the
// smaller vocabulary index.
inline std::vector<TopicWordSet> top_topic_words(const FactorModel& model, const Vocabulary& vocab, int m) {
  if (m < 2) throw ConfigError("top_topic_words: m must be >= 2");
  const int v = model.vocab_size();
  const int take = std::min(m, v);
  std::vector<TopicWordSet> topics;
  std::vector<int> order(static_cast<std::size_t>(v));
  for (int k = 0; k < model.topic_count(); ++k) {
    for (int i = 0; i < v; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return model.U(a, k) > model.U(b, k); });
    TopicWordSet t;
    t.topic_id = k;
    for (int r = 0; r < take; ++r) t.top_words.push_back(vocab.entries[static_cast<std::size_t>(order[r])]);
    topics.push_back(std::move(t));
  }
  return topics;
}

namespace detail {

inline std::size_t intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t n = 0, i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

}  // namespace detail

// Post-level boolean co-occurrence reference: one document per post.
struct CorpusCooc {
  long long n_docs = 0;
  std::vector<std::vector<int>> postings;  // vocab index -> sorted doc ids

  long long doc_count(int word) const {
    return word >= 0 && word < static_cast<int>(postings.size())
               ? static_cast<long long>(postings[static_cast<std::size_t>(word)].size())
               : 0;
  }
  long long pair_count(int a, int b) const {
    if (a < 0 || b < 0 || a >= static_cast<int>(postings.size()) || b >= static_cast<int>(postings.size())) return 0;
    return static_cast<long long>(
        detail::intersection_size(postings[static_cast<std::size_t>(a)], postings[static_cast<std::size_t>(b)]));
  }
};

inline CorpusCooc build_corpus_cooc(const std::vector<TokenizedPost>& posts, const Vocabulary& vocab) {
  CorpusCooc cooc;
  cooc.n_docs = static_cast<long long>(posts.size());
  cooc.postings.resize(static_cast<std::size_t>(vocab.size()));
  int doc = 0;
  std::vector<int> ids;
  for (const auto& post : posts) {
    ids.clear();
    for (const auto& t : post.tokens) {
      const int id = vocab.lookup(t);
      if (id >= 0) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) cooc.postings[static_cast<std::size_t>(id)].push_back(doc);
    ++doc;
  }
  return cooc;
}

inline constexpr double kNpmiEps = 1e-12;

// NPMI(i,j) = ln(p_ij / (p_i p_j)) / (-ln p_ij) with add-eps smoothing.
// A ubiquitous pair (p_ij ~ 1) carries no information and scores 0.
inline double npmi_from_probs(double p_ij, double p_i, double p_j, double eps = kNpmiEps) {
  p_ij += eps;
  p_i += eps;
  p_j += eps;
  const double denom = -std::log(p_ij);
  if (denom < 1e-12) return 0.0;
  return std::log(p_ij / (p_i * p_j)) / denom;
}

struct NpmiResult {
  double mean = 0.0;
  std::vector<double> per_topic;
  int oov_words = 0;  // top words missing from the reference, scored at p = eps
};

inline NpmiResult npmi(const std::vector<TopicWordSet>& topics, const CorpusCooc& cooc, const Vocabulary& vocab) {
  if (topics.empty()) throw ConfigError("npmi: no topics");
  NpmiResult result;
  const double n = static_cast<double>(std::max<long long>(cooc.n_docs, 1));
  for (const auto& topic : topics) {
    std::vector<int> ids;
    for (const auto& w : topic.top_words) {
      const int id = vocab.lookup(w);
      if (id < 0 || cooc.doc_count(id) == 0) ++result.oov_words;
      ids.push_back(id);
    }
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a + 1 < ids.size(); ++a) {
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        const double p_i = static_cast<double>(cooc.doc_count(ids[a])) / n;
        const double p_j = static_cast<double>(cooc.doc_count(ids[b])) / n;
        const double p_ij = static_cast<double>(cooc.pair_count(ids[a], ids[b])) / n;
        sum += npmi_from_probs(p_ij, p_i, p_j);
        ++pairs;
      }
    }
    result.per_topic.push_back(pairs > 0 ? sum / pairs : 0.0);
  }
  for (double t : result.per_topic) result.mean += t;
  result.mean /= static_cast<double>(result.per_topic.size());
  return result;
}

// Graph-reference NPMI: joint probabilities from normalized edge weights,
// marginals from normalized vertex strengths.
inline NpmiResult npmi_graph(const std::vector<TopicWordSet>& topics, const CooccurrenceGraph& graph) {
  if (topics.empty()) throw ConfigError("npmi: no topics");
  const double total = graph.total_weight();
  std::vector<double> strength(static_cast<std::size_t>(graph.vertex_count()), 0.0);
  std::map<std::pair<int, int>, double> weight;
  for (const auto& e : graph.edges) {
    strength[static_cast<std::size_t>(e.i)] += e.w;
    strength[static_cast<std::size_t>(e.j)] += e.w;
    weight[{e.i, e.j}] = e.w;
  }
  NpmiResult result;
  for (const auto& topic : topics) {
    std::vector<int> ids;
    for (const auto& w : topic.top_words) {
      const int id = graph.vocab.lookup(w);
      if (id < 0) ++result.oov_words;
      ids.push_back(id);
    }
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a + 1 < ids.size(); ++a) {
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        double p_i = 0.0, p_j = 0.0, p_ij = 0.0;
        if (total > 0.0) {
          const int lo = std::min(ids[a], ids[b]);
          const int hi = std::max(ids[a], ids[b]);
          if (ids[a] >= 0) p_i = strength[static_cast<std::size_t>(ids[a])] / (2.0 * total);
          if (ids[b] >= 0) p_j = strength[static_cast<std::size_t>(ids[b])] / (2.0 * total);
          if (lo >= 0) {
            auto it = weight.find({lo, hi});
            if (it != weight.end()) p_ij = it->second / total;
          }
        }
        sum += npmi_from_probs(p_ij, p_i, p_j);
        ++pairs;
      }
    }
    result.per_topic.push_back(pairs > 0 ? sum / pairs : 0.0);
  }
  for (double t : result.per_topic) result.mean += t;
  result.mean /= static_cast<double>(result.per_topic.size());
  return result;
}

// --- Cv ---

struct CvOptions {
  int window = 110;  // boolean sliding window length, in tokens
  double eps = kNpmiEps;
};

// Virtual documents for the boolean sliding window: max(1, L - window + 1)
// windows per post.
struct WindowCooc {
  long long n_windows = 0;
  std::vector<std::vector<int>> postings;

  long long count(int word) const {
    return word >= 0 && word < static_cast<int>(postings.size())
               ? static_cast<long long>(postings[static_cast<std::size_t>(word)].size())
               : 0;
  }
};

inline WindowCooc build_window_cooc(const std::vector<TokenizedPost>& posts, const Vocabulary& vocab, int window) {
  if (window < 2) throw ConfigError("cv: window must be >= 2");
  WindowCooc cooc;
  cooc.postings.resize(static_cast<std::size_t>(vocab.size()));
  std::set<int> present;
  for (const auto& post : posts) {
    const int len = post.length();
    if (len == 0) continue;
    const int n_win = std::max(1, len - window + 1);
    for (int s = 0; s < n_win; ++s) {
      present.clear();
      const int end = std::min(len, s + window);
      for (int t = s; t < end; ++t) {
        const int id = vocab.lookup(post.tokens[static_cast<std::size_t>(t)]);
        if (id >= 0) present.insert(id);
      }
      const int win_id = static_cast<int>(cooc.n_windows);
      for (int id : present) cooc.postings[static_cast<std::size_t>(id)].push_back(win_id);
      ++cooc.n_windows;
    }
  }
  return cooc;
}

// One-set segmentation Cv: per-word NPMI context vectors over the topic's own
// top words, compared by cosine against their sum, averaged over words then
// topics. Words absent from every window contribute zero vectors.
inline double cv(const std::vector<TopicWordSet>& topics, const std::vector<TokenizedPost>& posts,
                 const Vocabulary& vocab, const CvOptions& options = {}, std::vector<std::string>* warnings = nullptr) {
  int max_len = 0;
  for (const auto& p : posts) max_len = std::max(max_len, p.length());
  int window = options.window;
  if (max_len < window) {
    window = std::max(2, max_len);
    if (warnings) {
      warnings->push_back("cv: window " + std::to_string(options.window) + " exceeds the longest post (" +
                          std::to_string(max_len) + " tokens); every post forms one window");
    }
  }
  const WindowCooc cooc = build_window_cooc(posts, vocab, window);
  const double n = static_cast<double>(std::max<long long>(cooc.n_windows, 1));

  double topic_sum = 0.0;
  for (const auto& topic : topics) {
    std::vector<int> ids;
    for (const auto& w : topic.top_words) ids.push_back(vocab.lookup(w));
    const std::size_t m = ids.size();
    // context vectors: v[a][b] = NPMI(word_a, word_b), 0 when a marginal is 0
    std::vector<std::vector<double>> vec(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a) {
      const double p_a = static_cast<double>(cooc.count(ids[a])) / n;
      for (std::size_t b = 0; b < m; ++b) {
        const double p_b = static_cast<double>(cooc.count(ids[b])) / n;
        if (p_a <= 0.0 || p_b <= 0.0) continue;
        double p_ab;
        if (a == b) {
          p_ab = p_a;
        } else {
          p_ab = static_cast<double>(detail::intersection_size(
                     cooc.postings[static_cast<std::size_t>(ids[a])],
                     cooc.postings[static_cast<std::size_t>(ids[b])])) / n;
        }
        const double denom = -std::log(p_ab + options.eps);
        vec[a][b] = denom < 1e-12 ? 0.0 : std::log((p_ab + options.eps) / (p_a * p_b)) / denom;
      }
    }
    std::vector<double> set_vec(m, 0.0);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) set_vec[b] += vec[a][b];
    }
    double set_norm = 0.0;
    for (double x : set_vec) set_norm += x * x;
    set_norm = std::sqrt(set_norm);
    double phi_sum = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      double dot = 0.0, norm = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        dot += vec[a][b] * set_vec[b];
        norm += vec[a][b] * vec[a][b];
      }
      norm = std::sqrt(norm);
      phi_sum += (norm > 0.0 && set_norm > 0.0) ? dot / (norm * set_norm) : 0.0;
    }
    topic_sum += m > 0 ? phi_sum / static_cast<double>(m) : 0.0;
  }
  return topics.empty() ? 0.0 : topic_sum / static_cast<double>(topics.size());
}

// Fraction of unique words among all topics' top-m lists.
inline double topic_diversity(const std::vector<TopicWordSet>& topics) {
  if (topics.empty()) throw ConfigError("topic_diversity: no topics");
  const std::size_t m = topics.front().top_words.size();
  std::set<std::string> unique;
  for (const auto& t : topics) {
    if (t.top_words.size() != m) throw ConfigError("topic_diversity: topics must share the same m");
    unique.insert(t.top_words.begin(), t.top_words.end());
  }
  return static_cast<double>(unique.size()) / static_cast<double>(topics.size() * m);
}

// --- sharpness ---

struct SharpnessReport {
  std::vector<double> per_topic_entropy;  // nats
  double mean_entropy = 0.0;
  std::map<int, double> mean_topk_mass;  // m -> mean cumulative top-m mass
};

// Entropy and top-m mass of each topic's word multinomial. Topics are columns
// of U by default; on_residual reads columns of H instead (L1-normalized).
inline SharpnessReport sharpness(const FactorModel& model, const std::vector<int>& m_list = {10, 25},
                                 bool on_residual = false) {
  const Eigen::MatrixXd& source = on_residual ? model.H : model.U;
  SharpnessReport report;
  std::vector<double> probs(static_cast<std::size_t>(source.rows()));
  std::map<int, double> mass_sum;
  for (int m : m_list) mass_sum[m] = 0.0;
  for (int k = 0; k < source.cols(); ++k) {
    const double total = source.col(k).sum();
    double entropy = 0.0;
    if (total > 0.0) {
      for (Eigen::Index i = 0; i < source.rows(); ++i) {
        const double p = source(i, k) / total;
        probs[static_cast<std::size_t>(i)] = p;
        if (p > 0.0) entropy -= p * std::log(p);
      }
    } else {
      std::fill(probs.begin(), probs.end(), 0.0);
    }
    report.per_topic_entropy.push_back(entropy);
    std::sort(probs.begin(), probs.end(), std::greater<>());
    for (int m : m_list) {
      double mass = 0.0;
      for (int i = 0; i < m && i < static_cast<int>(probs.size()); ++i) mass += probs[static_cast<std::size_t>(i)];
      mass_sum[m] += mass;
    }
  }
  const double k_count = static_cast<double>(source.cols());
  for (double e : report.per_topic_entropy) report.mean_entropy += e;
  report.mean_entropy /= k_count;
  for (auto& [m, sum] : mass_sum) report.mean_topk_mass[m] = sum / k_count;
  return report;
}

// --- K sweep ---

struct SweepOptions {
  int m = 10;
  double td_floor = 0.5;
  bool graph_reference = false;  // NPMI against W instead of post co-occurrence
  int cv_window = 110;
};

struct SweepRow {
  int k = 0;
  double npmi = 0.0;
  double cv = 0.0;
  double td = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int selected_k = 0;
  bool floor_relaxed = false;  // no K met the TD floor; fell back to argmax NPMI
  std::vector<std::string> warnings;
};

// Fits one model per K under the same seed policy, scores each, and selects
// argmax NPMI subject to TD >= td_floor with ties toward smaller K.
inline SweepResult sweep_k(const CooccurrenceGraph& graph, const std::vector<TokenizedPost>& posts,
                           const std::vector<int>& k_values, const SolverConfig& base,
                           const SweepOptions& options = {}) {
  if (k_values.empty()) throw ConfigError("sweep: empty K list");
  SweepResult result;
  const CorpusCooc cooc = options.graph_reference ? CorpusCooc{} : build_corpus_cooc(posts, graph.vocab);
  for (int k : k_values) {
    SolverConfig cfg = base;
    cfg.k = k;
    try {
      auto [model, trace] = fit(graph, cfg);
      const auto topics = top_topic_words(model, graph.vocab, options.m);
      SweepRow row;
      row.k = k;
      row.npmi = options.graph_reference ? npmi_graph(topics, graph).mean : npmi(topics, cooc, graph.vocab).mean;
      row.cv = cv(topics, posts, graph.vocab, CvOptions{options.cv_window}, &result.warnings);
      row.td = topic_diversity(topics);
      result.rows.push_back(row);
    } catch (const Error& e) {
      throw Error(e.kind(), "K=" + std::to_string(k) + ": " + e.what());
    }
  }
  const auto better = [](const SweepRow& a, const SweepRow& b) {
    return a.npmi > b.npmi || (a.npmi == b.npmi && a.k < b.k);
  };
  const SweepRow* best = nullptr;
  for (const auto& row : result.rows) {
    if (row.td + 1e-12 >= options.td_floor && (!best || better(row, *best))) best = &row;
  }
  if (!best) {
    result.floor_relaxed = true;
    for (const auto& row : result.rows) {
      if (!best || better(row, *best)) best = &row;
    }
  }
  result.selected_k = best->k;
  return result;
}

inline std::string sweep_to_csv(const SweepResult& result) {
  std::string out = "# pdtopics.sweep.v1\nK,NPMI,Cv,TD\n";
  char buf[128];
  for (const auto& row : result.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f\n", row.k, row.npmi, row.cv, row.td);
    out += buf;
  }
  return out;
}

}  // namespace pdtopics
