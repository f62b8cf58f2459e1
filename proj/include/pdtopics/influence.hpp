#pragma once

// Static per-post influence weights: engagement-per-reach (itf) times a
// comment-arrival-rate factor (iidf), damped by a Hacker-News-style decay on
// the mean inter-comment gap, max-normalized across the corpus.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "pdtopics/common.hpp"
#include "pdtopics/corpus.hpp"

namespace pdtopics {

struct InfluenceParams {
  double eps_f = 1.0;     // reach smoothing in the engagement rate
  double tau0 = 1.0;      // time unit, hours
  double decay_g = 1.5;   // decay exponent
  double hn_shift = 2.0;  // additive shift in the decay base

  void validate() const {
    if (eps_f <= 0 || tau0 <= 0 || decay_g <= 0 || hn_shift <= 0) {
      throw ConfigError("influence parameters must all be positive");
    }
  }
};

struct InfluenceWeight {
  std::string post_id;
  double itf = 0.0;             // engagement per reach
  double iidf = 0.0;            // comment arrival rate factor
  double attention = 0.0;       // Y = itf * iidf
  double mean_gap_hours = 0.0;  // mean inter-comment gap
  double adjusted = 0.0;        // attention / (mean_gap/tau0 + shift)^g
  double weight = 0.0;          // adjusted / max adjusted, in [0, 1]
  bool pacing_imputed = false;  // gaps imputed from counts (no comment_times)
};

// Engagement normalized by audience reach: (c + l + r) / (F + eps_f).
inline double compute_itf(const Post& post, const InfluenceParams& params) {
  return static_cast<double>(post.comments + post.likes + post.reposts) /
         (static_cast<double>(post.followers) + params.eps_f);
}

struct CommentPacing {
  long long count = 0;              // T: number of comments
  std::vector<double> gaps_hours;   // max(1, T-1) entries
  bool imputed = false;
};

// Inter-comment gaps in hours. With observed comment_times and T >= 2 these
// are the consecutive differences; with T < 2 a single gap of tau0 stands in;
// with counts only (no timestamps) the pacing is imputed as uniform tau0 gaps.
inline CommentPacing compute_gaps(const Post& post, const InfluenceParams& params) {
  CommentPacing out;
  if (post.comment_times && post.comment_times->size() >= 2) {
    const auto& times = *post.comment_times;
    out.count = static_cast<long long>(times.size());
    out.gaps_hours.reserve(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double gap = static_cast<double>(times[i] - times[i - 1]) / 3600.0;
      if (gap < 0) throw DataError("post " + post.post_id + ": decreasing comment timestamps");
      out.gaps_hours.push_back(gap);
    }
    return out;
  }
  if (post.comment_times) {
    out.count = static_cast<long long>(post.comment_times->size());  // 0 or 1
    out.gaps_hours.assign(1, params.tau0);
    return out;
  }
  out.count = post.comments;
  out.imputed = true;
  if (out.count < 2) {
    out.gaps_hours.assign(1, params.tau0);
  } else {
    out.gaps_hours.assign(static_cast<std::size_t>(out.count - 1), params.tau0);
  }
  return out;
}

// Denominators are floored at 1e-6 * tau0 so simultaneous comments stay finite
// while keeping the faster-is-larger ordering.
inline constexpr double kGapFloorRatio = 1e-6;

// Arrival-rate factor, natural log. T >= 3 divides by the total commenting
// duration, T < 3 by the largest gap.
inline double compute_iidf(long long count, const std::vector<double>& gaps_hours, const InfluenceParams& params) {
  if (gaps_hours.empty()) throw NumericalError("compute_iidf: empty gap list");
  double denom_hours;
  if (count >= 3) {
    denom_hours = std::accumulate(gaps_hours.begin(), gaps_hours.end(), 0.0);
  } else {
    denom_hours = *std::max_element(gaps_hours.begin(), gaps_hours.end());
  }
  const double denom = std::max(denom_hours / params.tau0, kGapFloorRatio);
  return std::log1p(static_cast<double>(count) / denom);
}

inline double mean_gap_hours(const std::vector<double>& gaps_hours) {
  if (gaps_hours.empty()) throw NumericalError("mean_gap_hours: empty gap list");
  return std::accumulate(gaps_hours.begin(), gaps_hours.end(), 0.0) / static_cast<double>(gaps_hours.size());
}

// Decay-adjusted attention: Y / (mean_gap/tau0 + shift)^g.
inline double adjusted_attention(double attention, double mean_gap, const InfluenceParams& params) {
  return attention / std::pow(mean_gap / params.tau0 + params.hn_shift, params.decay_g);
}

// Divides by the corpus max; all-zero corpora map to all-zero weights.
inline void normalize_weights(std::vector<InfluenceWeight>& weights) {
  double max_adj = 0.0;
  for (const auto& w : weights) max_adj = std::max(max_adj, w.adjusted);
  for (auto& w : weights) w.weight = max_adj > 0.0 ? w.adjusted / max_adj : 0.0;
}

inline std::vector<InfluenceWeight> compute_weights(const std::vector<Post>& posts, const InfluenceParams& params) {
  params.validate();
  if (posts.empty()) throw DataError("compute_weights: empty post list");
  std::vector<InfluenceWeight> out;
  out.reserve(posts.size());
  for (const auto& post : posts) {
    InfluenceWeight w;
    w.post_id = post.post_id;
    w.itf = compute_itf(post, params);
    const auto pacing = compute_gaps(post, params);
    w.pacing_imputed = pacing.imputed;
    w.iidf = compute_iidf(pacing.count, pacing.gaps_hours, params);
    w.attention = w.itf * w.iidf;
    w.mean_gap_hours = mean_gap_hours(pacing.gaps_hours);
    w.adjusted = adjusted_attention(w.attention, w.mean_gap_hours, params);
    out.push_back(std::move(w));
  }
  normalize_weights(out);
  return out;
}

}  // namespace pdtopics
