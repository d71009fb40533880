#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "enshrink/errors.hpp"
#include "enshrink/metrics.hpp"
#include "oracles.hpp"

using namespace enshrink;

TEST_CASE("rmse") {
  const std::vector<Vector> truth{Vector::LinSpaced(3, 0, 2), Vector::LinSpaced(3, 1, 3)};
  CHECK(spatiotemporal_rmse(truth, truth) == 0.0);

  std::vector<Vector> shifted = truth;
  for (Vector& v : shifted) v.array() -= 0.75;
  CHECK(spatiotemporal_rmse(shifted, truth) == doctest::Approx(0.75).epsilon(1e-15));

  const std::vector<Vector> zero{Vector::Zero(2), Vector::Zero(2)};
  const std::vector<Vector> ones{Vector::Ones(2), Vector::Ones(2)};
  CHECK(spatiotemporal_rmse(ones, zero) == 1.0);
  CHECK(unnormalized_error_norm(ones, zero) == 2.0);

  CHECK_THROWS_AS(spatiotemporal_rmse(ones, {Vector::Zero(2)}), Error);
}

TEST_CASE("rmse is permutation invariant") {
  oracle::Rng rng(61);
  std::vector<Vector> a, b;
  for (int k = 0; k < 5; ++k) {
    a.push_back(oracle::gaussian(4, 1, rng));
    b.push_back(oracle::gaussian(4, 1, rng));
  }
  const double base = spatiotemporal_rmse(a, b);
  std::reverse(a.begin(), a.end());
  std::reverse(b.begin(), b.end());
  for (Vector& v : a) v.reverseInPlace();
  for (Vector& v : b) v.reverseInPlace();
  CHECK(spatiotemporal_rmse(a, b) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("truth rank") {
  Rng rng(1);
  Vector m(3);
  m << 1.0, 3.0, 5.0;
  CHECK(truth_rank(m, 4.0, rng) == 2);
  CHECK(truth_rank(m, 0.0, rng) == 0);
  CHECK(truth_rank(m, 9.0, rng) == 3);

  // a tie with every member lands anywhere with equal probability
  Vector tied = Vector::Constant(3, 2.0);
  std::vector<int> counts(4, 0);
  for (int t = 0; t < 4000; ++t) ++counts[static_cast<std::size_t>(truth_rank(tied, 2.0, rng))];
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("rank histogram") {
  Rng rng(2);
  SUBCASE("truth below everything") {
    std::vector<Ensemble> ens;
    std::vector<Vector> truth;
    for (int t = 0; t < 10; ++t) {
      ens.push_back({Matrix::Ones(2, 5), 0.0});
      truth.push_back(Vector::Zero(2));
    }
    const RankHistogram h = rank_histogram(ens, truth, 1, rng);
    CHECK(h.bins.size() == 6);
    CHECK(h.bins[0] == 10);
    CHECK(h.total == 10);
    CHECK(kl_from_uniform(h) > 0.5);
  }
  SUBCASE("exchangeable truth is uniform") {
    std::normal_distribution<double> nd;
    std::vector<Ensemble> ens;
    std::vector<Vector> truth;
    for (int t = 0; t < 10000; ++t) {
      Ensemble e{Matrix(1, 5), 0.0};
      for (int k = 0; k < 5; ++k) e.members(0, k) = nd(rng);
      ens.push_back(e);
      truth.push_back(Vector::Constant(1, nd(rng)));
    }
    const RankHistogram h = rank_histogram(ens, truth, 0, rng);
    const double p = 1.0 / 6.0;
    const double sd = std::sqrt(10000 * p * (1 - p));
    for (long c : h.bins) CHECK(std::abs(c - 10000 * p) < 3 * sd);
  }
  SUBCASE("bad index") {
    CHECK_THROWS_AS(rank_histogram({{Matrix::Ones(2, 3), 0.0}}, {Vector::Zero(2)}, 2, rng), Error);
  }
}

TEST_CASE("histogram merge") {
  RankHistogram a(3), b(3), c(3);
  a.add(0);
  a.add(1);
  b.add(3);
  c.add(2);
  RankHistogram ab = a;
  ab.merge(b).merge(c);
  RankHistogram cb = c;
  cb.merge(b).merge(a);
  CHECK(ab.bins == cb.bins);
  CHECK(ab.total == 4);
  RankHistogram empty;
  empty.merge(a);
  CHECK(empty.bins == a.bins);
  CHECK_THROWS_AS(a.merge(RankHistogram(4)), Error);
  CHECK_THROWS_AS(a.add(4), Error);
}

TEST_CASE("kl from uniform") {
  RankHistogram uniform(5);
  for (int k = 0; k < 6; ++k)
    for (int r = 0; r < 7; ++r) uniform.add(k);
  CHECK(kl_from_uniform(uniform) == 0.0);

  RankHistogram spike(5);
  for (int r = 0; r < 100; ++r) spike.add(2);
  const double smoothed = kl_from_uniform(spike);
  CHECK(smoothed > 0.0);
  CHECK(std::isfinite(smoothed));

  // unsmoothed: all mass in one of six bins
  std::vector<double> q(6, 0.0), p(6, 1.0 / 6.0);
  q[2] = 1.0;
  CHECK(relative_entropy(q, p) == doctest::Approx(std::log(6.0)).epsilon(1e-15));
  CHECK(relative_entropy(p, q) == std::numeric_limits<double>::infinity());

  RankHistogram permuted(5);
  RankHistogram original(5);
  const int counts[6] = {5, 9, 0, 3, 12, 1};
  for (int k = 0; k < 6; ++k)
    for (int r = 0; r < counts[k]; ++r) {
      original.add(k);
      permuted.add(5 - k);
    }
  CHECK(kl_from_uniform(original) == doctest::Approx(kl_from_uniform(permuted)).epsilon(1e-14));
  CHECK(kl_from_uniform(original) >= 0.0);

  CHECK_THROWS_AS(kl_from_uniform(RankHistogram(5)), Error);
}

TEST_CASE("chi square against uniform") {
  RankHistogram h(1);
  h.add(0);
  h.add(0);
  h.add(1);
  h.add(1);
  CHECK(chi_square_uniform(h) == 0.0);
  h.add(0);
  h.add(0);
  // counts (4, 2), expected 3 each
  CHECK(chi_square_uniform(h) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("divergence monitor") {
  DivergenceMonitor ok(3, 10.0);
  for (int t = 0; t < 10; ++t) CHECK_FALSE(ok.record(Vector::Ones(2), Vector::Zero(2)));

  DivergenceMonitor big(3, 10.0);
  CHECK(big.record(Vector::Constant(2, 12.0), Vector::Zero(2)));

  DivergenceMonitor window(4, 10.0);
  CHECK_FALSE(window.record(Vector::Constant(1, 1.0), Vector::Zero(1)));
  CHECK_FALSE(window.record(Vector::Constant(1, 12.0), Vector::Zero(1)));
  CHECK(window.record(Vector::Constant(1, 15.0), Vector::Zero(1)));
  CHECK(window.diverged());

  DivergenceMonitor nan;
  CHECK(nan.record(Vector::Constant(1, std::nan("")), Vector::Zero(1)));
}
