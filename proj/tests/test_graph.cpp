#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace pdtopics;
using Catch::Matchers::WithinAbs;

namespace {

TokenizedPost tp(const std::string& id, std::vector<std::string> tokens) {
  TokenizedPost p;
  p.post_id = id;
  p.tokens = std::move(tokens);
  return p;
}

InfluenceWeight iw(const std::string& id, double w) {
  InfluenceWeight x;
  x.post_id = id;
  x.weight = w;
  x.adjusted = w;
  return x;
}

Vocabulary vocab_of(const std::vector<TokenizedPost>& posts) {
  Vocabulary v;
  for (const auto& p : posts) {
    for (const auto& t : p.tokens) v.add(t);
  }
  return v;
}

}  // namespace

TEST_CASE("salience modes") {
  std::vector<TokenizedPost> posts;
  for (int i = 0; i < 8; ++i) posts.push_back(tp("p" + std::to_string(i), {"common", i == 0 ? "rare" : "filler"}));
  const auto vocab = vocab_of(posts);

  SECTION("unit mode is all ones") {
    const auto s = compute_salience(posts, vocab, SalienceMode::unit);
    for (int i = 0; i < vocab.size(); ++i) CHECK(s[i] == 1.0);
  }
  SECTION("a word in every post has zero capped-IDF salience") {
    const auto s = compute_salience(posts, vocab, SalienceMode::capped_idf);
    CHECK_THAT(s[vocab.lookup("common")], WithinAbs(0.0, 1e-12));
  }
  SECTION("the cap binds: word in 1 of 8 posts, cap 1.5") {
    const auto s = compute_salience(posts, vocab, SalienceMode::capped_idf, 1.5);
    CHECK_THAT(s[vocab.lookup("rare")], WithinAbs(1.5, 1e-12));  // ln 8 > 1.5
  }
  SECTION("boost factors multiply") {
    const auto s = compute_salience(posts, vocab, SalienceMode::unit, 3.0, {{"rare", 2.5}});
    CHECK_THAT(s[vocab.lookup("rare")], WithinAbs(2.5, 1e-12));
  }
  SECTION("nonpositive cap is a config error") {
    CHECK_THROWS_AS(compute_salience(posts, vocab, SalienceMode::capped_idf, 0.0), ConfigError);
  }
}

TEST_CASE("repeated adjacency within one post counts once") {
  const std::vector<TokenizedPost> posts = {tp("p", {"a", "b", "a"})};
  const auto vocab = vocab_of(posts);
  const auto g = build_graph(posts, {iw("p", 1.0)}, vocab, Eigen::VectorXd::Ones(vocab.size()));
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].i == vocab.lookup("a"));
  CHECK(g.edges[0].j == vocab.lookup("b"));
  CHECK_THAT(g.edges[0].w, WithinAbs(1.0, 1e-12));
}

TEST_CASE("edge weights sum post weights") {
  const std::vector<TokenizedPost> posts = {tp("p", {"a", "b"}), tp("q", {"a", "b", "c"})};
  const auto vocab = vocab_of(posts);
  const auto g =
      build_graph(posts, {iw("p", 0.5), iw("q", 1.0)}, vocab, Eigen::VectorXd::Ones(vocab.size()));
  const auto w = g.dense();
  CHECK_THAT(w(0, 1), WithinAbs(1.5, 1e-12));
  CHECK_THAT(w(1, 2), WithinAbs(1.0, 1e-12));
}

TEST_CASE("equal adjacent indices yield no edge") {
  const std::vector<TokenizedPost> posts = {tp("p", {"a", "a", "a"})};
  const auto vocab = vocab_of(posts);
  const auto g = build_graph(posts, {iw("p", 1.0)}, vocab, Eigen::VectorXd::Ones(vocab.size()));
  CHECK(g.edges.empty());
}

TEST_CASE("graph is symmetric and hollow with i<j storage") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> len(2, 8);
  std::uniform_int_distribution<int> word(0, 11);
  std::vector<TokenizedPost> posts;
  std::vector<InfluenceWeight> weights;
  for (int p = 0; p < 20; ++p) {
    std::vector<std::string> tokens;
    const int n = len(rng);
    for (int t = 0; t < n; ++t) tokens.push_back("w" + std::to_string(word(rng)));
    posts.push_back(tp("p" + std::to_string(p), tokens));
    weights.push_back(iw("p" + std::to_string(p), 0.1 * (p % 10) + 0.05));
  }
  const auto vocab = vocab_of(posts);
  const auto g = build_graph(posts, weights, vocab, Eigen::VectorXd::Ones(vocab.size()));
  for (const auto& e : g.edges) {
    CHECK(e.i < e.j);
    CHECK(e.w > 0.0);
  }
  const auto w = g.dense();
  CHECK(w.isApprox(w.transpose()));
  CHECK(w.diagonal().isZero());
  CHECK(g.edges.size() <= static_cast<std::size_t>(vocab.size() * (vocab.size() - 1) / 2));
}

TEST_CASE("doubling every post weight doubles every edge") {
  const std::vector<TokenizedPost> posts = {tp("p", {"a", "b", "c"}), tp("q", {"b", "c", "d"})};
  const auto vocab = vocab_of(posts);
  const std::vector<InfluenceWeight> w1 = {iw("p", 0.3), iw("q", 0.6)};
  std::vector<InfluenceWeight> w2 = w1;
  for (auto& w : w2) w.weight *= 2.0;
  const auto g1 = build_graph(posts, w1, vocab, Eigen::VectorXd::Ones(vocab.size()));
  const auto g2 = build_graph(posts, w2, vocab, Eigen::VectorXd::Ones(vocab.size()));
  REQUIRE(g1.edges.size() == g2.edges.size());
  for (std::size_t e = 0; e < g1.edges.size(); ++e) {
    CHECK_THAT(g2.edges[e].w, WithinAbs(2.0 * g1.edges[e].w, 1e-12));
  }
}

// independent dense oracle: with unit weights and salience, the edge weight is
// the number of posts whose bigram set contains the pair
TEST_CASE("unit-weight graph matches a brute-force post-counting oracle") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(2, 6);
  std::uniform_int_distribution<int> word(0, 9);
  std::vector<TokenizedPost> posts;
  std::vector<InfluenceWeight> weights;
  for (int p = 0; p < 20; ++p) {
    std::vector<std::string> tokens;
    const int n = len(rng);
    for (int t = 0; t < n; ++t) tokens.push_back("w" + std::to_string(word(rng)));
    posts.push_back(tp("p" + std::to_string(p), tokens));
    weights.push_back(iw("p" + std::to_string(p), 1.0));
  }
  const auto vocab = vocab_of(posts);
  const auto g = build_graph(posts, weights, vocab, Eigen::VectorXd::Ones(vocab.size()));
  const auto dense = g.dense();
  for (int i = 0; i < vocab.size(); ++i) {
    for (int j = i + 1; j < vocab.size(); ++j) {
      int count = 0;
      for (const auto& post : posts) {
        bool found = false;
        for (std::size_t t = 0; t + 1 < post.tokens.size(); ++t) {
          const int a = vocab.lookup(post.tokens[t]);
          const int b = vocab.lookup(post.tokens[t + 1]);
          if (a != b && std::min(a, b) == i && std::max(a, b) == j) found = true;
        }
        if (found) ++count;
      }
      CHECK_THAT(dense(i, j), WithinAbs(static_cast<double>(count), 1e-12));
    }
  }
}

TEST_CASE("salience scales both endpoints") {
  const std::vector<TokenizedPost> posts = {tp("p", {"a", "b"})};
  const auto vocab = vocab_of(posts);
  Eigen::VectorXd s(2);
  s << 2.0, 3.0;
  const auto g = build_graph(posts, {iw("p", 0.5)}, vocab, s);
  REQUIRE(g.edges.size() == 1);
  CHECK_THAT(g.edges[0].w, WithinAbs(2.0 * 3.0 * 0.5, 1e-12));
}

TEST_CASE("all-zero weights fall back to uniform with a warning") {
  const std::vector<TokenizedPost> posts = {tp("p", {"a", "b"})};
  const auto vocab = vocab_of(posts);
  std::vector<std::string> warnings;
  const auto g = build_graph(posts, {iw("p", 0.0)}, vocab, Eigen::VectorXd::Ones(2), {}, &warnings);
  REQUIRE(g.edges.size() == 1);
  CHECK_THAT(g.edges[0].w, WithinAbs(1.0, 1e-12));
  CHECK(warnings.size() == 1);

  GraphBuildOptions strict;
  strict.zero_weight_fallback = false;
  CHECK_THROWS_AS(build_graph(posts, {iw("p", 0.0)}, vocab, Eigen::VectorXd::Ones(2), strict), DataError);
}

TEST_CASE("post and weight mismatch is an error") {
  const std::vector<TokenizedPost> posts = {tp("p", {"a", "b"})};
  const auto vocab = vocab_of(posts);
  CHECK_THROWS_AS(build_graph(posts, {iw("other", 1.0)}, vocab, Eigen::VectorXd::Ones(2)), DataError);
}

TEST_CASE("edge files round-trip") {
  testutil::TempDir tmp("edges");
  std::mt19937_64 rng(5);
  const auto g = testutil::random_graph(12, 0.3, rng);
  write_edges_tsv(g, tmp.file("edges.tsv"));
  write_vocab(g.vocab, tmp.file("vocab.txt"));
  const auto g2 = read_edges_tsv(tmp.file("edges.tsv"), read_vocab(tmp.file("vocab.txt")));
  REQUIRE(g2.edges.size() == g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    CHECK(g2.edges[e].i == g.edges[e].i);
    CHECK(g2.edges[e].j == g.edges[e].j);
    CHECK(g2.edges[e].w == g.edges[e].w);  // %.17g is lossless
  }
  CHECK(g2.vocab.entries == g.vocab.entries);
}
