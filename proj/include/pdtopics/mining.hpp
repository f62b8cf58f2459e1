#pragma once

// Post-to-topic assignment by aggregated token loadings, event keyword
// extraction from the strongest posts of each topic, and importance ranking.

#include <algorithm>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "pdtopics/common.hpp"
#include "pdtopics/corpus.hpp"
#include "pdtopics/solver.hpp"

namespace pdtopics {

struct PostTopicActivity {
  std::string post_id;
  Eigen::VectorXd x;   // length K, sum of dictionary rows over in-vocab tokens
  int dominant = -1;   // argmax (smallest index on ties); -1 when no token maps
};

// x_p[k] = sum over token occurrences of u_{pi(t),k}, optionally scaled by a_k.
inline PostTopicActivity activity(const TokenizedPost& post, const FactorModel& model, const Vocabulary& vocab,
                                  bool weighted = false) {
  PostTopicActivity out;
  out.post_id = post.post_id;
  out.x = Eigen::VectorXd::Zero(model.topic_count());
  bool any = false;
  for (const auto& t : post.tokens) {
    const int id = vocab.lookup(t);
    if (id < 0) continue;
    any = true;
    out.x += model.U.row(id).transpose();
  }
  if (weighted) out.x = out.x.cwiseProduct(model.A);
  if (any) {
    int best = 0;
    for (int k = 1; k < model.topic_count(); ++k) {
      if (out.x[k] > out.x[best]) best = k;  // strict: ties keep the smaller index
    }
    out.dominant = best;
  }
  return out;
}

inline std::vector<PostTopicActivity> assign_posts(const std::vector<TokenizedPost>& posts, const FactorModel& model,
                                                   const Vocabulary& vocab, bool weighted = false) {
  std::vector<PostTopicActivity> out;
  out.reserve(posts.size());
  for (const auto& p : posts) out.push_back(activity(p, model, vocab, weighted));
  return out;
}

struct EventKeyword {
  std::string word;
  long long count = 0;
};

struct KeywordFilters {
  std::unordered_set<std::string> stop_words;
  std::unordered_set<std::string> place_names;

  bool drop(const std::string& w) const { return stop_words.count(w) > 0 || place_names.count(w) > 0; }
};

// Content-word frequencies over the n_top_posts posts with the highest
// activation for `topic` among those assigned to it. Ties in activation keep
// corpus order; ties in count order alphabetically.
inline std::vector<EventKeyword> event_keywords(const std::vector<PostTopicActivity>& assignments,
                                                const std::vector<TokenizedPost>& posts, int topic, int n_top_posts,
                                                int n_keywords, const KeywordFilters& filters = {},
                                                std::vector<std::string>* warnings = nullptr) {
  if (assignments.size() != posts.size()) throw DataError("event_keywords: assignments and posts differ in length");
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i].dominant == topic) members.push_back(i);
  }
  if (members.empty()) {
    if (warnings) warnings->push_back("topic " + std::to_string(topic) + " has no assigned posts");
    return {};
  }
  std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
    return assignments[a].x[topic] > assignments[b].x[topic];
  });
  if (static_cast<int>(members.size()) > n_top_posts) members.resize(static_cast<std::size_t>(n_top_posts));

  std::map<std::string, long long> counts;
  for (std::size_t idx : members) {
    for (const auto& t : posts[idx].tokens) {
      if (!filters.drop(t)) ++counts[t];
    }
  }
  std::vector<EventKeyword> ranked;
  ranked.reserve(counts.size());
  for (const auto& [word, count] : counts) ranked.push_back({word, count});
  std::stable_sort(ranked.begin(), ranked.end(), [](const EventKeyword& a, const EventKeyword& b) {
    return a.count > b.count || (a.count == b.count && a.word < b.word);
  });
  if (static_cast<int>(ranked.size()) > n_keywords) ranked.resize(static_cast<std::size_t>(n_keywords));
  return ranked;
}

struct TopicSummary {
  int topic_id = 0;
  double importance = 0.0;  // a_k
  std::vector<std::string> top_words;
  std::vector<EventKeyword> event_keywords;
  long long n_assigned_posts = 0;
};

// Topics ordered by descending a_k (stable: equal importances keep index order).
inline std::vector<TopicSummary> rank_topics(const FactorModel& model, const Vocabulary& vocab, int m = 10) {
  const auto words = top_topic_words(model, vocab, m);
  std::vector<TopicSummary> out;
  for (int k = 0; k < model.topic_count(); ++k) {
    TopicSummary s;
    s.topic_id = k;
    s.importance = model.A[k];
    s.top_words = words[static_cast<std::size_t>(k)].top_words;
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TopicSummary& a, const TopicSummary& b) { return a.importance > b.importance; });
  return out;
}

}  // namespace pdtopics
