#include <doctest.h>

#include <cmath>

#include "enshrink/climatology.hpp"
#include "enshrink/errors.hpp"
#include "enshrink/shrinkage.hpp"
#include "oracles.hpp"

using namespace enshrink;

TEST_CASE("sphericity hand values") {
  CHECK(sphericity(Vector::Constant(10, 0.3), 10) == doctest::Approx(0.0).epsilon(1e-15));
  Vector s = Vector::Zero(10);
  s(0) = 1.0;
  CHECK(sphericity(s, 10) == 1.0);
  CHECK_THROWS_AS(sphericity(Vector::Zero(4), 4), Error);
}

TEST_CASE("sphericity matches the dense oracle") {
  oracle::Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const int n = 8;
    const Matrix c = oracle::random_spd(n, rng);
    const Matrix a = oracle::gaussian(n, 5, rng);
    const double got = sphericity(whiten(TargetCovariance::from_covariance(c), a), n);
    CHECK(std::abs(got - oracle::dense_sphericity(a, c)) < 1e-10);
  }
}

TEST_CASE("rblw") {
  CHECK(rblw_gamma(0.0, 40, 4) == 1.0);
  CHECK(rblw_gamma(1e-13, 40, 4) == 1.0);
  CHECK(rblw_gamma(1e12, 40, 4) == doctest::Approx(1.0 / 12.0).epsilon(1e-9));
  CHECK_THROWS_AS(rblw_gamma(0.5, 40, 1), Error);

  double prev = 1.0;
  for (double u = 0.01; u < 100.0; u *= 1.5) {
    const double g = rblw_gamma(u, 40, 4);
    CHECK(g <= prev);
    CHECK(g >= 0.0);
    prev = g;
  }
}

TEST_CASE("rblw matches a re-implementation on sampled ensembles") {
  oracle::Rng rng(32);
  Rng clim_rng(1);
  const TargetCovariance p = TargetCovariance::from_covariance(oracle::random_spd(40, rng));
  for (int t = 0; t < 10; ++t) {
    const Matrix a = oracle::centered(40, 5, rng);
    const double u = sphericity(whiten(p, a), 40);
    CHECK(rblw_gamma(u, 40, 4) == oracle::rblw(u, 40, 4));
  }
}

TEST_CASE("rblw shrinks less with more samples") {
  // Samples from the target itself leave the whitened covariance spherical up
  // to noise, where the weight stays near 1 for any N. Use a truth that
  // differs from the target so the trend is visible.
  Rng rng(33);
  oracle::Rng g(34);
  const TargetCovariance truth = TargetCovariance::from_covariance(oracle::random_spd(10, g));
  const TargetCovariance p = TargetCovariance::from_covariance(Matrix::Identity(10, 10));
  auto trials = [&](int big_n) {
    std::vector<double> out;
    for (int t = 0; t < 100; ++t) {
      const Ensemble e = sample_synthetic(Vector::Zero(10), 1.0, truth, {big_n, {}}, rng);
      const Matrix a = decompose(e).anomalies;
      out.push_back(rblw_gamma(sphericity(whiten(p, a), 10), 10, big_n - 1));
    }
    return out;
  };
  auto stats = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, std::sqrt(s / (v.size() - 1))};
  };
  const auto [m50, s50] = stats(trials(50));
  const auto [m500, s500] = stats(trials(500));
  const double se = std::sqrt((s50 * s50 + s500 * s500) / 100.0);
  CHECK(m50 - m500 > 3.0 * se);
}

TEST_CASE("closed form weight") {
  oracle::Rng rng(35);
  SUBCASE("identical members") {
    const Ensemble e{Matrix::Constant(3, 4, 1.5), 0.0};
    CHECK(closed_form_gamma(e, Matrix::Identity(3, 3)) == 0.0);
  }
  SUBCASE("sample covariance equals target") {
    const Ensemble e{oracle::gaussian(3, 4, rng), 0.0};
    const Matrix c = oracle::two_pass_covariance(e.members);
    CHECK(closed_form_gamma(e, c) == 1.0);
  }
  SUBCASE("scalar loop oracle") {
    for (int t = 0; t < 50; ++t) {
      const Ensemble e{oracle::gaussian(3, 4, rng) * 2.0, 0.0};
      const Matrix p = oracle::random_spd(3, rng);
      const double got = closed_form_gamma(e, p);
      CHECK(std::abs(got - oracle::closed_form_loop(e.members, p)) < 1e-10);
      CHECK(got >= 0.0);
      CHECK(got <= 1.0);
    }
  }
}

TEST_CASE("gamma policy parsing") {
  CHECK(GammaPolicy::parse("rblw").kind == GammaPolicy::Kind::RBLW);
  CHECK(GammaPolicy::parse("closed_form").kind == GammaPolicy::Kind::ClosedForm);
  const GammaPolicy g = GammaPolicy::parse("0.85");
  CHECK(g.kind == GammaPolicy::Kind::Static);
  CHECK(g.value == 0.85);
  CHECK(g.label() == "0.85");
  CHECK_THROWS_AS(GammaPolicy::parse("1"), Error);
  CHECK_THROWS_AS(GammaPolicy::parse("-0.1"), Error);
  CHECK_THROWS_AS(GammaPolicy::parse("lw"), Error);
}
