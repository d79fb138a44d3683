#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "sldml/metric.hpp"
#include "support/oracles.hpp"

using namespace sldml;

namespace {

Eigen::MatrixXd random_batch(std::mt19937_64& rng, Eigen::Index dim, Eigen::Index b) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd e(dim, b);
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = n(rng);
  return e;
}

std::vector<oracle::Vec> columns(const Eigen::MatrixXd& e) {
  std::vector<oracle::Vec> out;
  for (Eigen::Index j = 0; j < e.cols(); ++j) out.emplace_back(e.col(j).data(), e.col(j).data() + e.rows());
  return out;
}

std::set<std::pair<int, int>> as_set(const std::vector<std::pair<int, int>>& v) { return {v.begin(), v.end()}; }

Eigen::MatrixXd line(std::initializer_list<double> xs) {
  Eigen::MatrixXd e(1, Eigen::Index(xs.size()));
  Eigen::Index j = 0;
  for (double x : xs) e(0, j++) = x;
  return e;
}

}  // namespace

TEST_CASE("pairwise_distances") {
  Eigen::MatrixXd e(2, 2);
  e << 0, 3, 0, 4;
  const auto d = pairwise_distances(e);
  CHECK(d(0, 1) == 5);
  CHECK(d(1, 0) == 5);
  CHECK(d.diagonal().isZero(0));

  std::mt19937_64 rng(2);
  const auto r = random_batch(rng, 8, 5);
  const auto dr = pairwise_distances(r);
  const auto cols = columns(r);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) CHECK(std::abs(dr(i, j) - oracle::distance(cols[i], cols[j])) < 1e-12);
  }
}

TEST_CASE("miner worked example on a line") {
  const std::vector<int> labels{0, 0, 1, 1};
  const auto pairs = mine_multi_similarity(line({0, 1, 2, 10}), labels, 0.05);
  CHECK(pairs.positives == std::vector<std::pair<int, int>>{{1, 0}, {2, 3}});
  CHECK(pairs.negatives == std::vector<std::pair<int, int>>{{1, 2}, {2, 0}, {2, 1}});

  const std::vector<int> same{3, 3, 3};
  const auto none = mine_multi_similarity(line({0, 1, 5}), same, 0.05);
  CHECK(none.negatives.empty());
  CHECK(none.positives.empty());
}

TEST_CASE("miner matches the brute-force oracle on random batches") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index b = 2 + Eigen::Index(rng() % 31);
    const Eigen::Index dim = 1 + Eigen::Index(rng() % 8);
    const int num_labels = 1 + int(rng() % 5);
    std::vector<int> labels(static_cast<std::size_t>(b));
    for (auto& l : labels) l = int(rng() % std::uint64_t(num_labels));
    const auto e = random_batch(rng, dim, b);
    for (auto mode : {MinerMode::Standard, MinerMode::LiteralEq3}) {
      const auto got = mine_multi_similarity(e, labels, 0.05, mode);
      const auto want = oracle::brute_force_mine(columns(e), labels, 0.05, mode == MinerMode::LiteralEq3);
      CHECK(as_set(got.positives) == want.positives);
      CHECK(as_set(got.negatives) == want.negatives);
      CHECK(std::is_sorted(got.positives.begin(), got.positives.end()));
      CHECK(std::is_sorted(got.negatives.begin(), got.negatives.end()));
      for (auto [i, j] : got.positives) CHECK((i != j && labels[std::size_t(i)] == labels[std::size_t(j)]));
      for (auto [i, j] : got.negatives) CHECK(labels[std::size_t(i)] != labels[std::size_t(j)]);
    }
  }
}

TEST_CASE("miner properties: epsilon monotonicity and translation invariance") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index b = 4 + Eigen::Index(rng() % 20);
    std::vector<int> labels(static_cast<std::size_t>(b));
    for (auto& l : labels) l = int(rng() % 4);
    const auto e = random_batch(rng, 4, b);
    const auto small = mine_multi_similarity(e, labels, 0.01);
    const auto large = mine_multi_similarity(e, labels, 0.5);
    const auto ps = as_set(small.positives), pl = as_set(large.positives);
    const auto ns = as_set(small.negatives), nl = as_set(large.negatives);
    CHECK(std::includes(pl.begin(), pl.end(), ps.begin(), ps.end()));
    CHECK(std::includes(nl.begin(), nl.end(), ns.begin(), ns.end()));
  }
  // translation by integers on an integer grid is exact
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd e(3, 10);
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = double(int(rng() % 21) - 10);
    std::vector<int> labels(10);
    for (auto& l : labels) l = int(rng() % 3);
    const Eigen::MatrixXd t = e.colwise() + Eigen::Vector3d(7, -3, 12);
    const auto a = mine_multi_similarity(e, labels, 0.05);
    const auto b = mine_multi_similarity(t, labels, 0.05);
    CHECK(a.positives == b.positives);
    CHECK(a.negatives == b.negatives);
  }
}

TEST_CASE("literal-eq3 mode mines every negative pair") {
  std::mt19937_64 rng(29);
  const auto e = random_batch(rng, 6, 16);
  std::vector<int> labels(16);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(i % 4);
  const auto pairs = mine_multi_similarity(e, labels, 0.05, MinerMode::LiteralEq3);
  CHECK(pairs.negatives.size() == 16 * 12);
  CHECK(miner_mode_name(MinerMode::LiteralEq3) == "literal-eq3");
  CHECK(parse_miner_mode("standard") == MinerMode::Standard);
  CHECK_THROWS_AS(parse_miner_mode("other"), Error);
}

TEST_CASE("triplet_margin_loss examples") {
  Eigen::MatrixXd e(2, 3);
  e << 0, 3, 1,  //
      0, 4, 0;
  MinedPairs pairs{{{0, 1}}, {{0, 2}}};
  const auto hand = triplet_margin_loss(e, pairs, 0.1);
  CHECK(std::abs(hand.value - 4.1) < 1e-12);
  CHECK(hand.triplets == 1);
  CHECK(hand.active == 1);

  Eigen::MatrixXd sat(1, 3);
  sat << 0, 0, 1;
  const auto zero = triplet_margin_loss(sat, pairs, 0.1);
  CHECK(zero.value == 0);
  CHECK(zero.active == 0);

  CHECK(triplet_margin_loss(e, MinedPairs{}, 0.1).value == 0);
  CHECK_THROWS_AS(triplet_margin_loss(e, pairs, -1.0), Error);
}

TEST_CASE("triplet_margin_loss cross product and gradient") {
  // anchor 0 with two positives and two negatives gives four triplets
  Eigen::MatrixXd e(2, 5);
  e << 0, 1, 0, 2, 0,  //
      0, 0, 1, 0, 3;
  MinedPairs pairs{{{0, 1}, {0, 2}}, {{0, 3}, {0, 4}}};
  const auto loss = triplet_margin_loss(e, pairs, 1.5);
  CHECK(loss.triplets == 4);
  // hinges: 1-2+1.5=0.5, 1-3+1.5=-0.5 -> 0, twice each
  CHECK(std::abs(loss.value - 0.25) < 1e-12);

  std::mt19937_64 rng(31);
  const auto r = random_batch(rng, 3, 6);
  MinedPairs rp{{{0, 1}, {2, 3}}, {{0, 4}, {0, 5}, {2, 5}}};
  Eigen::MatrixXd grad;
  const auto base = triplet_margin_loss(r, rp, 2.0, &grad);
  REQUIRE(base.active > 0);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    Eigen::MatrixXd plus = r, minus = r;
    plus(i) += h;
    minus(i) -= h;
    const double fd = (triplet_margin_loss(plus, rp, 2.0).value - triplet_margin_loss(minus, rp, 2.0).value) / (2 * h);
    CHECK(std::abs(fd - grad(i)) < 1e-7);
  }
}

TEST_CASE("cross_entropy_loss") {
  for (int c : {2, 20, 120}) {
    const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(c, 3);
    const std::vector<int> labels{0, 1, c - 1};
    CHECK(std::abs(cross_entropy_loss(z, labels) - std::log(double(c))) < 1e-10);
  }

  Eigen::MatrixXd sat = Eigen::MatrixXd::Zero(5, 2);
  sat(2, 0) = 1000;
  sat(4, 1) = 1000;
  const std::vector<int> sat_labels{2, 4};
  CHECK(cross_entropy_loss(sat, sat_labels) < 1e-9);

  std::mt19937_64 rng(37);
  const auto logits = random_batch(rng, 5, 4);
  const std::vector<int> labels{0, 3, 4, 1};
  std::vector<oracle::Vec> rows = columns(logits);
  const double want = oracle::naive_cross_entropy(rows, labels);
  Eigen::MatrixXd grad;
  CHECK(std::abs(cross_entropy_loss(logits, labels, &grad) - want) < 1e-10);
  // softmax rows sum to one, so each gradient column sums to zero
  CHECK(grad.colwise().sum().cwiseAbs().maxCoeff() < 1e-15);

  const Eigen::MatrixXd shifted = logits.array() + 123.0;
  CHECK(std::abs(cross_entropy_loss(shifted, labels) - want) < 1e-10);

  const std::vector<int> bad{0, 5, 1, 1};
  try {
    cross_entropy_loss(logits, bad);
    FAIL("expected InvalidLabel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidLabel);
  }
}

TEST_CASE("total_loss weights") {
  CHECK(total_loss(2.0, 4.0, LossWeights{}) == 3.0);
  LossWeights triplet_only;
  triplet_only.alpha = 1;
  triplet_only.beta = 0;
  CHECK(total_loss(0.123456789, 7.0, triplet_only) == 0.123456789);
}
