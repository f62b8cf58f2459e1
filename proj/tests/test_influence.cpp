#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace pdtopics;
using Catch::Matchers::WithinAbs;

namespace {

Post make_post(long long likes, long long comments, long long reposts, long long followers) {
  Post p;
  p.post_id = "p";
  p.likes = likes;
  p.comments = comments;
  p.reposts = reposts;
  p.followers = followers;
  return p;
}

}  // namespace

TEST_CASE("engagement rate pins the hand examples exactly") {
  InfluenceParams params;
  CHECK_THAT(compute_itf(make_post(0, 1, 0, 0), params), WithinAbs(1.0, 1e-12));
  CHECK_THAT(compute_itf(make_post(0, 0, 0, 12345), params), WithinAbs(0.0, 1e-12));
  CHECK_THAT(compute_itf(make_post(5, 3, 2, 99), params), WithinAbs(0.1, 1e-12));
}

TEST_CASE("gap extraction covers observed, sparse and imputed pacing") {
  InfluenceParams params;

  Post timed = make_post(0, 3, 0, 0);
  timed.comment_times = std::vector<std::int64_t>{36000, 37800, 41400};  // 10:00, 10:30, 11:30
  auto pacing = compute_gaps(timed, params);
  CHECK(pacing.count == 3);
  REQUIRE(pacing.gaps_hours.size() == 2);
  CHECK_THAT(pacing.gaps_hours[0], WithinAbs(0.5, 1e-12));
  CHECK_THAT(pacing.gaps_hours[1], WithinAbs(1.0, 1e-12));
  CHECK_FALSE(pacing.imputed);

  pacing = compute_gaps(make_post(0, 0, 0, 0), params);
  CHECK(pacing.count == 0);
  CHECK(pacing.gaps_hours == std::vector<double>{params.tau0});

  pacing = compute_gaps(make_post(0, 5, 0, 0), params);
  CHECK(pacing.count == 5);
  CHECK(pacing.gaps_hours == std::vector<double>(4, 1.0));
  CHECK(pacing.imputed);
  // downstream arrival rate for the imputed case: log(1 + 5/4)
  CHECK_THAT(compute_iidf(pacing.count, pacing.gaps_hours, params), WithinAbs(std::log(1.0 + 5.0 / 4.0), 1e-12));

  Post bad = timed;
  (*bad.comment_times)[2] = 0;
  CHECK_THROWS_AS(compute_gaps(bad, params), DataError);
}

TEST_CASE("arrival rate branches pin the hand examples exactly") {
  InfluenceParams params;
  CHECK_THAT(compute_iidf(0, {1.0}, params), WithinAbs(0.0, 1e-12));
  CHECK_THAT(compute_iidf(2, {1.0}, params), WithinAbs(std::log(3.0), 1e-12));
  CHECK_THAT(compute_iidf(4, {0.5, 0.5, 1.0}, params), WithinAbs(std::log(3.0), 1e-12));
  // simultaneous comments hit the 1e-6 * tau0 denominator floor
  CHECK_THAT(compute_iidf(2, {0.0}, params), WithinAbs(std::log1p(2.0 / 1e-6), 1e-9));
}

TEST_CASE("decay and normalization pin the hand examples exactly") {
  InfluenceParams params;
  CHECK_THAT(adjusted_attention(3.0, 0.0, params), WithinAbs(3.0 / std::pow(2.0, 1.5), 1e-12));

  std::vector<InfluenceWeight> weights(1);
  weights[0].adjusted = 3.0 / std::pow(2.0, 1.5);
  normalize_weights(weights);
  CHECK_THAT(weights[0].weight, WithinAbs(1.0, 1e-12));

  weights.assign(2, {});
  weights[0].adjusted = 2.0;
  weights[1].adjusted = 4.0;
  normalize_weights(weights);
  CHECK_THAT(weights[0].weight, WithinAbs(0.5, 1e-12));
  CHECK_THAT(weights[1].weight, WithinAbs(1.0, 1e-12));
}

TEST_CASE("a corpus with zero engagement everywhere gets all-zero weights") {
  std::vector<Post> posts = {make_post(0, 0, 0, 10), make_post(0, 0, 0, 0)};
  posts[1].post_id = "q";
  const auto weights = compute_weights(posts, InfluenceParams{});
  for (const auto& w : weights) CHECK(w.weight == 0.0);
}

TEST_CASE("weights land in [0,1] and exactly the argmax posts reach 1") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<long long> count(0, 40);
  std::vector<Post> posts;
  for (int i = 0; i < 50; ++i) {
    auto p = make_post(count(rng), count(rng), count(rng), count(rng) * 20);
    p.post_id = "p" + std::to_string(i);
    posts.push_back(std::move(p));
  }
  const auto weights = compute_weights(posts, InfluenceParams{});
  double max_adjusted = 0.0;
  for (const auto& w : weights) max_adjusted = std::max(max_adjusted, w.adjusted);
  REQUIRE(max_adjusted > 0.0);
  int at_one = 0;
  for (const auto& w : weights) {
    CHECK(w.weight >= 0.0);
    CHECK(w.weight <= 1.0);
    if (w.weight == 1.0) {
      ++at_one;
      CHECK(w.adjusted == max_adjusted);
    }
  }
  CHECK(at_one >= 1);
}

TEST_CASE("adjusted weight is monotone in engagement with pacing held fixed") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<long long> count(0, 30);
  std::uniform_int_distribution<long long> bump(1, 10);
  std::uniform_int_distribution<std::int64_t> gap(60, 7200);
  InfluenceParams params;
  for (int trial = 0; trial < 200; ++trial) {
    Post p = make_post(count(rng), count(rng) + 1, count(rng), count(rng) * 15);
    std::vector<std::int64_t> times{0};
    const int extra = static_cast<int>(count(rng) % 5);
    for (int i = 0; i < extra; ++i) times.push_back(times.back() + gap(rng));
    if (times.size() >= 2) p.comment_times = times;

    const auto base = compute_weights({p}, params)[0];

    Post more = p;
    const int field = trial % 3;
    if (field == 0) more.comments += bump(rng);
    if (field == 1) more.likes += bump(rng);
    if (field == 2) more.reposts += bump(rng);
    if (field == 0 && !p.comment_times) continue;  // count change alters imputed pacing
    const auto bigger = compute_weights({more}, params)[0];
    CHECK(bigger.adjusted >= base.adjusted - 1e-15);
  }
}

TEST_CASE("adjusted weight is nonincreasing when all gaps stretch") {
  InfluenceParams params;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> stretch(1.1, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    Post p = make_post(5, 4, 1, 100);
    std::vector<std::int64_t> times{0, 600, 1800, 5400};
    p.comment_times = times;
    const auto base = compute_weights({p}, params)[0];
    const double factor = stretch(rng);
    for (auto& t : *p.comment_times) t = static_cast<std::int64_t>(static_cast<double>(t) * factor);
    const auto slower = compute_weights({p}, params)[0];
    CHECK(slower.adjusted <= base.adjusted + 1e-15);
  }
}

TEST_CASE("scaling every adjusted weight leaves normalized weights unchanged") {
  std::vector<InfluenceWeight> weights(5);
  for (int i = 0; i < 5; ++i) weights[static_cast<std::size_t>(i)].adjusted = 0.3 * (i + 1);
  auto scaled = weights;
  for (auto& w : scaled) w.adjusted *= 37.5;
  normalize_weights(weights);
  normalize_weights(scaled);
  for (int i = 0; i < 5; ++i) {
    CHECK_THAT(scaled[static_cast<std::size_t>(i)].weight,
               WithinAbs(weights[static_cast<std::size_t>(i)].weight, 1e-15));
  }
}

// The count fallback switches arrival-rate branches at T=3, so w_p is not
// globally monotone in the comment count when pacing is imputed; this pins the
// boundary so the scoped monotonicity claim above stays honest.
TEST_CASE("imputed pacing boundary: branch switch at T=3 is visible") {
  InfluenceParams params;
  const auto w2 = compute_iidf(2, {1.0}, params);        // ln 3
  const auto w3 = compute_iidf(3, {1.0, 1.0}, params);   // ln 2.5
  CHECK(w2 > w3);
}

TEST_CASE("full-corpus weights on the mini fixture are reproducible") {
  const auto posts = ingest(testutil::data_dir() + "/mini_corpus.jsonl", InputFormat::jsonl);
  const auto weights = compute_weights(posts, InfluenceParams{});
  REQUIRE(weights.size() == 12);
  // p01: itf = 17/151, iidf = ln 10 (3 comments over 1/3 h)
  CHECK_THAT(weights[0].itf, WithinAbs(17.0 / 151.0, 1e-12));
  CHECK_THAT(weights[0].iidf, WithinAbs(std::log(10.0), 1e-12));
  CHECK_THAT(weights[0].mean_gap_hours, WithinAbs(1.0 / 6.0, 1e-12));
  // p05 has zero comments: zero arrival rate, zero weight
  CHECK(weights[4].post_id == "p05");
  CHECK(weights[4].weight == 0.0);
  // p03 (simultaneous comments, floored denominator) dominates the corpus
  CHECK(weights[2].post_id == "p03");
  CHECK_THAT(weights[2].weight, WithinAbs(1.0, 1e-12));
}
