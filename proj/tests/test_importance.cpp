#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "pointscan/importance/importance.hpp"
#include "support/oracles.hpp"

using namespace pointscan;
using Catch::Approx;

TEST_CASE("score orderings on a hand example", "[importance]") {
  const std::vector<double> scores = {0.5, -0.2, 1.0};
  CHECK(descending_order(scores) == std::vector<std::size_t>{2, 0, 1});
  CHECK(ascending_order(scores) == std::vector<std::size_t>{1, 0, 2});
  CHECK(sio_perm(scores) == std::vector<std::size_t>{2, 0, 1});
  CHECK(bio_perm(scores) == std::vector<std::size_t>{2, 0, 1, 1, 0, 2});
}

TEST_CASE("equal scores break ties by index, mirrored across passes",
          "[importance]") {
  const std::vector<double> flat = {0.7, 0.7, 0.7};
  CHECK(descending_order(flat) == std::vector<std::size_t>{0, 1, 2});
  CHECK(ascending_order(flat) == std::vector<std::size_t>{2, 1, 0});
}

TEST_CASE("ascending pass is always the exact reverse of descending",
          "[importance]") {
  RngStream rng(51, "imp-reverse");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(24);
    std::vector<double> scores(n);
    for (auto& s : scores) s = rng.uniform(-1.0, 1.0);
    // inject duplicates so the tiebreak actually fires
    for (std::size_t i = 1; i < n; i += 3) scores[i] = scores[i - 1];
    auto down = descending_order(scores);
    auto up = ascending_order(scores);
    std::reverse(up.begin(), up.end());
    INFO("trial " << trial << " n=" << n);
    CHECK(down == up);
  }
}

TEST_CASE("bidirectional pass visits every group exactly twice",
          "[importance]") {
  RngStream rng(52, "imp-bio");
  std::vector<double> scores(9);
  for (auto& s : scores) s = rng.normal();
  auto perm = bio_perm(scores);
  REQUIRE(perm.size() == 18);
  std::vector<int> count(9, 0);
  for (std::size_t i : perm) ++count[i];
  for (int c : count) CHECK(c == 2);
}

TEST_CASE("orderings reject bad scores", "[importance]") {
  CHECK_THROWS_AS(descending_order({0.1, std::nan(""), 0.2}), NumericError);
  CHECK_THROWS_AS(
      ascending_order({std::numeric_limits<double>::infinity()}),
      NumericError);
  CHECK_THROWS_AS(sio_perm({}), ArgError);
  CHECK_THROWS_AS(bio_perm({}), ArgError);
}

TEST_CASE("arrange_sequence gathers tokens and scores by the permutation",
          "[importance]") {
  auto emb = Tensor::of({3, 2}, {1, 2, 3, 4, 5, 6});
  auto pos = Tensor::of({3, 2}, {10, 20, 30, 40, 50, 60});
  auto scores = Tensor::of({3, 1}, {0.5, -0.2, 1.0});
  auto seq = arrange_sequence(emb, pos, scores, {2, 0, 1});
  CHECK(seq.perm == std::vector<std::size_t>{2, 0, 1});
  CHECK(seq.tokens->data == std::vector<double>{55, 66, 11, 22, 33, 44});
  CHECK(seq.scores->data == std::vector<double>{1.0, 0.5, -0.2});
  CHECK_THROWS_AS(arrange_sequence(emb, pos, Tensor::zeros({2, 1}), {0, 1, 2}),
                  DimError);
  CHECK_THROWS_AS(arrange_sequence(emb, Tensor::zeros({2, 2}), scores,
                                   {0, 1, 2}),
                  DimError);
}

TEST_CASE("order_groups covers every strategy", "[importance]") {
  auto emb = Tensor::of({3, 2}, {1, 2, 3, 4, 5, 6});
  auto pos = Tensor::zeros({3, 2});
  auto scores = Tensor::of({3, 1}, {0.5, -0.2, 1.0});
  const std::vector<Point3> keys = {{0.9, 0, 0}, {0.1, 0, 0}, {0.5, 0, 0}};

  CHECK(order_groups(emb, pos, scores, keys, OrderStrategy::sio).perm ==
        std::vector<std::size_t>{2, 0, 1});
  CHECK(order_groups(emb, pos, scores, keys, OrderStrategy::bio).perm.size() ==
        6);
  CHECK(order_groups(emb, pos, scores, keys, OrderStrategy::xyz).perm ==
        std::vector<std::size_t>{1, 2, 0});

  RngStream rng(53, "imp-order");
  auto rnd = order_groups(emb, pos, scores, keys, OrderStrategy::random, &rng);
  std::vector<std::size_t> sorted = rnd.perm;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(
      order_groups(emb, pos, scores, keys, OrderStrategy::random, nullptr),
      ArgError);

  for (auto s : {OrderStrategy::morton, OrderStrategy::hilbert}) {
    auto seq = order_groups(emb, pos, scores, keys, s);
    std::vector<std::size_t> chk = seq.perm;
    std::sort(chk.begin(), chk.end());
    CHECK(chk == std::vector<std::size_t>{0, 1, 2});
  }
}

TEST_CASE("strategy names round-trip through the parser", "[importance]") {
  for (const char* name : {"random", "xyz", "morton", "hilbert", "sio", "bio"})
    CHECK(order_strategy_name(parse_order_strategy(name)) ==
          std::string(name));
  CHECK_THROWS_AS(parse_order_strategy("zigzag"), ConfigError);
  for (const char* name : {"iap", "iap_step", "avg", "max", "wsum"})
    CHECK(pool_strategy_name(parse_pool_strategy(name)) == std::string(name));
  CHECK_THROWS_AS(parse_pool_strategy("sum"), ConfigError);
}

TEST_CASE("importance-aware pooling on a hand example", "[importance]") {
  auto tokens = Tensor::of({3, 2}, {1, 0, 0, 1, 2, 2});
  auto scores = Tensor::of({3, 1}, {0.5, -0.2, 1.0});

  auto clamped = iap_pool(tokens, scores, false);
  REQUIRE(clamped.f->shape == std::vector<std::size_t>{1, 2});
  CHECK(clamped.f->data == std::vector<double>{2.5, 2.0});  // exact
  CHECK_FALSE(clamped.degenerate);

  auto stepped = iap_pool(tokens, scores, true);
  CHECK(stepped.f->data == std::vector<double>{3.0, 2.0});
  CHECK_FALSE(stepped.degenerate);

  CHECK_THROWS_AS(iap_pool(tokens, Tensor::zeros({2, 1}), false), DimError);
}

TEST_CASE("pooling a sequence with no positive score degenerates to zero",
          "[importance]") {
  auto tokens = Tensor::of({2, 2}, {1, 2, 3, 4});
  auto scores = Tensor::of({2, 1}, {-0.5, 0.0});
  for (bool step : {false, true}) {
    auto pooled = iap_pool(tokens, scores, step);
    CHECK(pooled.degenerate);
    CHECK(pooled.f->data == std::vector<double>{0.0, 0.0});
  }
}

TEST_CASE("non-positive scores block gradient flow through the pool",
          "[importance]") {
  auto tokens = Tensor::of({3, 2}, {1, 0, 0, 1, 2, 2}, true);
  auto scores = Tensor::of({3, 1}, {0.5, -0.2, 1.0}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    auto pooled = iap_pool(tokens, scores, false);
    tape.backward(sum(pooled.f));
  }
  // rows 0 and 2 contribute with their clamped weight; row 1 is cut off
  CHECK(tokens->grad == std::vector<double>{0.5, 0.5, 0.0, 0.0, 1.0, 1.0});
  // the clamp also kills the score gradient on the negative side
  CHECK(scores->grad[0] == Approx(1.0));  // sum of row 0
  CHECK(scores->grad[1] == 0.0);
  CHECK(scores->grad[2] == Approx(4.0));
}

TEST_CASE("baseline pooling strategies", "[importance]") {
  auto tokens = Tensor::of({3, 2}, {1, 0, 0, 1, 2, 2});
  auto scores = Tensor::of({3, 1}, {0.5, -0.2, 1.0});
  auto avg = pool_tokens(tokens, scores, PoolStrategy::avg);
  CHECK(avg.f->data[0] == Approx(1.0));
  CHECK(avg.f->data[1] == Approx(1.0));
  auto mx = pool_tokens(tokens, scores, PoolStrategy::max);
  CHECK(mx.f->data == std::vector<double>{2.0, 2.0});
  auto ws = pool_tokens(tokens, scores, PoolStrategy::wsum);
  CHECK(ws.f->data[0] == Approx(2.5));
  CHECK(ws.f->data[1] == Approx(1.8));  // negative weights stay in
  CHECK_FALSE(ws.degenerate);
  CHECK(pool_tokens(tokens, scores, PoolStrategy::iap).f->data ==
        iap_pool(tokens, scores, false).f->data);
}

TEST_CASE("score-driven ordering cancels an input shuffle bit for bit",
          "[importance]") {
  RngStream rng(54, "imp-invariance");
  const std::size_t G = 8, D = 4;
  auto emb = Tensor::zeros({G, D});
  auto pos = Tensor::zeros({G, D});
  auto scores = Tensor::zeros({G, 1});
  for (auto& v : emb->data) v = rng.normal();
  for (auto& v : pos->data) v = rng.normal();
  for (std::size_t i = 0; i < G; ++i)
    scores->data[i] = double(i) * 0.3 - 1.0;  // distinct scores

  auto pool_of = [&](const TensorPtr& e, const TensorPtr& p,
                     const TensorPtr& s) {
    auto seq = arrange_sequence(e, p, s, bio_perm(s->data));
    return iap_pool(seq.tokens, seq.scores, false).f->data;
  };
  auto base = pool_of(emb, pos, scores);

  std::vector<std::size_t> shuffle(G);
  std::iota(shuffle.begin(), shuffle.end(), std::size_t{0});
  rng.shuffle(shuffle);
  auto e2 = gather_rows(emb, shuffle);
  auto p2 = gather_rows(pos, shuffle);
  auto s2 = gather_rows(scores, shuffle);
  CHECK(pool_of(e2, p2, s2) == base);  // bit-identical, not approximate
}

TEST_CASE("importance regression learns only through the predictions",
          "[importance]") {
  auto pred = Tensor::of({3, 1}, {0.3, 0.6, -0.1}, true);
  auto targets = Tensor::of({3, 1}, {0.5, 0.2, 0.1}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(importance_loss(pred, targets));
  }
  CHECK_FALSE(pred->grad.empty());
  CHECK(targets->grad.empty());  // detached: no closure ever touched it

  // value: all residuals are within the quadratic zone
  const double expect = ((0.5 * 0.04) + (0.5 * 0.16) + (0.5 * 0.04)) / 3.0;
  CHECK(importance_loss(pred, targets)->item() == Approx(expect));
}

TEST_CASE("alignment loss is exactly zero for a single cloud",
          "[importance]") {
  RngStream rng(55, "imp-align");
  auto gp = Tensor::zeros({4, 3});
  for (auto& v : gp->data) v = rng.normal();
  auto gp_unit = l2_normalize_rows(gp);
  auto global = l2_normalize_rows(Tensor::of({1, 3}, {0.2, -0.5, 1.0}));
  CHECK(alignment_loss(gp_unit, global, 4)->item() == 0.0);
}

TEST_CASE("alignment loss hand value for two clouds", "[importance]") {
  // one group per cloud, projections equal to the global features
  auto gp = Tensor::of({2, 2}, {1, 0, 0, 1});
  auto global = Tensor::of({2, 2}, {1, 0, 0, 1});
  // each row: logits [1, 0] with its own cloud first
  CHECK(alignment_loss(gp, global, 1)->item() ==
        Approx(std::log(1.0 + std::exp(-1.0))));
  // sharper temperature moves the loss toward zero
  CHECK(alignment_loss(gp, global, 1, 0.1)->item() <
        alignment_loss(gp, global, 1, 1.0)->item());
}

TEST_CASE("alignment loss argument validation", "[importance]") {
  auto gp = Tensor::zeros({4, 3});
  auto global = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(alignment_loss(gp, global, 2, 0.0), ConfigError);
  CHECK_THROWS_AS(alignment_loss(gp, global, 2, -1.0), ConfigError);
  CHECK_THROWS_AS(alignment_loss(gp, global, 3), DimError);
  CHECK_THROWS_AS(alignment_loss(gp, global, 0), DimError);
}

TEST_CASE("projection head emits unit rows", "[importance]") {
  ParamStore ps(56);
  ProjectionHead proj(ps, "proj", 6, 8, 5);
  RngStream rng(57, "imp-proj");
  auto x = Tensor::zeros({4, 6});
  for (auto& v : x->data) v = rng.normal();
  bool degenerate = true;
  auto y = proj(x, true, &degenerate);
  REQUIRE(y->shape == std::vector<std::size_t>{4, 5});
  CHECK_FALSE(degenerate);
  for (std::size_t r = 0; r < 4; ++r) {
    double n2 = 0.0;
    for (std::size_t c = 0; c < 5; ++c) n2 += y->at(r, c) * y->at(r, c);
    CHECK(n2 == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("importance head yields one score per row", "[importance]") {
  ParamStore ps(58);
  ImportanceHead head(ps, "imp", 6, 8);
  RngStream rng(59, "imp-head");
  auto x = Tensor::zeros({5, 6});
  for (auto& v : x->data) v = rng.normal();
  auto s = head(x, true);
  CHECK(s->shape == std::vector<std::size_t>{5, 1});
  auto s_eval = head(x, false);
  CHECK(s_eval->shape == std::vector<std::size_t>{5, 1});
}
