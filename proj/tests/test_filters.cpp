#include <doctest.h>

#include <cmath>
#include <limits>

#include "enshrink/errors.hpp"
#include "enshrink/filters.hpp"
#include "enshrink/taper.hpp"
#include "oracles.hpp"

using namespace enshrink;

namespace {

struct Instance {
  AnomalySet s;
  Matrix h;
  Matrix r;
  Matrix sa, sz;
};

// Random linear-Gaussian instance with forecast and synthetic anomalies.
Instance make_instance(oracle::Rng& rng, int n, int m, int big_n, int big_m) {
  Instance in;
  in.h = oracle::gaussian(m, n, rng);
  in.r = oracle::random_spd(m, rng);
  in.s.state = oracle::centered(n, big_n, rng);
  in.s.obs = in.h * in.s.state;
  in.s.mean = oracle::gaussian(n, 1, rng);
  in.s.obs_mean = in.h * in.s.mean;
  in.s.innovation = oracle::gaussian(m, 1, rng);
  in.sa = oracle::centered(n, big_m, rng);
  in.sz = in.h * in.sa;
  return in;
}

Matrix anomalies_of(const TransformResult& r) { return decompose(r.analysis).anomalies; }

Matrix gram(const Matrix& a) { return a * a.transpose(); }

}  // namespace

TEST_CASE("etkf without observation sensitivity") {
  oracle::Rng rng(41);
  Ensemble e{oracle::gaussian(4, 5, rng), 0.0};
  const Vector mean = e.members.rowwise().mean();
  // H maps everything to zero: Z = 0 and d = y.
  const ObservationOperator h = ObservationOperator::linear(Matrix::Zero(2, 4));
  const ObservationRecord obs{Vector::Zero(2), Matrix::Identity(2, 2), 0.0};
  const TransformResult res = etkf_analysis(e, obs, h, 1.0);
  CHECK(oracle::rel_err(res.mean, mean) < 1e-14);
  CHECK(oracle::rel_err(res.analysis.members, e.members) < 1e-12);

  const TransformResult inflated = etkf_analysis(e, obs, h, 1.5);
  Matrix want = e.members;
  want.colwise() -= mean;
  want *= 1.5;
  want.colwise() += mean;
  CHECK(oracle::rel_err(inflated.analysis.members, want) < 1e-12);
}

TEST_CASE("etkf scalar kalman") {
  Ensemble e{Matrix(1, 3), 0.0};
  e.members << 1.0, 2.0, 4.5;
  const Vector x = e.members.rowwise().mean();
  const Matrix a = decompose(e).anomalies;
  const double sb = (a * a.transpose())(0, 0), sr = 0.7;
  const ObservationRecord obs{Vector::Constant(1, 3.9), Matrix::Constant(1, 1, sr), 0.0};
  const TransformResult res = etkf_analysis(e, obs, ObservationOperator::identity(1), 1.0);
  const double var = gram(anomalies_of(res))(0, 0);
  CHECK(std::abs(var - 1.0 / (1.0 / sb + 1.0 / sr)) < 1e-10);
  CHECK(std::abs(res.mean(0) - (x(0) + sb / (sb + sr) * (3.9 - x(0)))) < 1e-10);
}

TEST_CASE("etkf matches the kalman oracle") {
  oracle::Rng rng(42);
  for (int t = 0; t < 50; ++t) {
    const Instance in = make_instance(rng, 5, 3, 7, 2);
    const TransformResult res = etkf_update(in.s, in.r);
    const oracle::Kalman k =
        oracle::kalman(in.s.mean, gram(in.s.state), in.h, in.r, in.s.innovation + in.h * in.s.mean);
    const Matrix aa = anomalies_of(res);
    CHECK(oracle::rel_err(res.mean, k.mean) < 1e-9);
    CHECK(oracle::rel_err(gram(aa), k.cov) < 1e-9);
    // T·1 = 1 keeps the analysis anomalies centered
    CHECK(aa.rowwise().sum().norm() < 1e-10);
    const EnsembleTransform tr = ensemble_transform(in.s.obs, in.r);
    CHECK((tr.sqrt * Vector::Ones(7) - Vector::Ones(7)).norm() < 1e-10);
  }
}

TEST_CASE("extended anomalies") {
  oracle::Rng rng(43);
  const Instance in = make_instance(rng, 6, 4, 4, 5);
  SUBCASE("gamma zero") {
    const ExtendedAnomalySet ext = build_extended(in.s.state, in.s.obs, in.sa, in.sz, 0.0);
    CHECK(oracle::rel_err(gram(ext.state), gram(in.s.state)) < 1e-15);
    CHECK(ext.physical_size == 4);
  }
  SUBCASE("gamma half") {
    const ExtendedAnomalySet ext = build_extended(in.s.state, in.s.obs, in.sa, in.sz, 0.5);
    CHECK(oracle::rel_err(gram(ext.state), 0.5 * gram(in.s.state) + 0.5 * gram(in.sa)) < 1e-12);
    CHECK(ext.state.rowwise().sum().norm() < 1e-13);
    CHECK(ext.obs.rowwise().sum().norm() < 1e-13);
  }
  SUBCASE("gamma at bound") {
    try {
      build_extended(in.s.state, in.s.obs, in.sa, in.sz, 1.0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::GammaAtBound);
    }
  }
}

TEST_CASE("extended transform identities") {
  oracle::Rng rng(44);
  for (int t = 0; t < 40; ++t) {
    const int n = 4 + t % 9, m = 2 + t % 5, big_n = 3 + t % 4, big_m = 2 + t % 6;
    const double gamma = 0.05 + 0.9 * (t % 10) / 10.0;
    const Instance in = make_instance(rng, n, m, big_n, big_m);
    const ExtendedAnomalySet ext = build_extended(in.s.state, in.s.obs, in.sa, in.sz, gamma);
    const EnsembleTransform tr = ensemble_transform(ext.obs, in.r);
    const Matrix s = ext.obs * ext.obs.transpose() + in.r;
    const Matrix g = Matrix::Identity(big_n + big_m, big_n + big_m) -
                     ext.obs.transpose() * s.inverse() * ext.obs;
    CHECK(oracle::rel_err(tr.sqrt * tr.sqrt.transpose(), g) < 1e-9);
    const Matrix got = ext.state * tr.sqrt * tr.sqrt.transpose() * ext.state.transpose();
    const Matrix want = oracle::goal_covariance(in.s.state, in.s.obs, in.sa, in.sz, in.r, gamma);
    CHECK(oracle::rel_err(got, want) < 1e-9);
  }
}

TEST_CASE("shrinkage with zero weight is the etkf") {
  oracle::Rng rng(45);
  for (int t = 0; t < 20; ++t) {
    const Instance in = make_instance(rng, 8, 6, 4, 5);
    const TransformResult etkf = etkf_update(in.s, in.r);
    const TransformResult sym =
        shrinkage_update(in.s, in.sa, in.sz, in.r, 0.0, FilterVariant::ShrinkSymmetric);
    const TransformResult low =
        shrinkage_update(in.s, in.sa, in.sz, in.r, 0.0, FilterVariant::ShrinkLowRank);
    CHECK(oracle::rel_err(sym.mean, etkf.mean) < 1e-9);
    CHECK(oracle::rel_err(sym.analysis.members, etkf.analysis.members) < 1e-9);
    CHECK(oracle::rel_err(low.mean, etkf.mean) < 1e-9);
    const Matrix low_a = (low.analysis.members.colwise() - low.mean) / std::sqrt(3.0);
    CHECK(oracle::rel_err(gram(low_a), gram(anomalies_of(etkf))) < 1e-9);
    const oracle::Kalman k = oracle::kalman(in.s.mean, gram(in.s.state), in.h, in.r,
                                            in.s.innovation + in.h * in.s.mean);
    const Matrix sym_a = (sym.analysis.members.colwise() - sym.mean) / std::sqrt(3.0);
    CHECK(oracle::rel_err(gram(sym_a), k.cov) < 1e-9);
  }
}

TEST_CASE("symmetric and low-rank variants") {
  oracle::Rng rng(46);
  for (int t = 0; t < 20; ++t) {
    const Instance in = make_instance(rng, 10, 7, 5, 8);
    const double gamma = 0.1 + 0.04 * t;
    const TransformResult sym =
        shrinkage_update(in.s, in.sa, in.sz, in.r, gamma, FilterVariant::ShrinkSymmetric);
    const TransformResult low =
        shrinkage_update(in.s, in.sa, in.sz, in.r, gamma, FilterVariant::ShrinkLowRank);
    CHECK(oracle::rel_err(sym.mean, low.mean) < 1e-10);
    CHECK(sym.analysis.size() == 5);
    CHECK(low.analysis.size() == 5);
    const double tr_sym = (sym.analysis.members.colwise() - sym.mean).squaredNorm();
    const double tr_low = (low.analysis.members.colwise() - low.mean).squaredNorm();
    CHECK(tr_low >= tr_sym * (1.0 - 1e-12));
    CHECK(sym.analysis.members.allFinite());
  }
}

TEST_CASE("truncated anomalies and recentering") {
  oracle::Rng rng(47);
  const Instance in = make_instance(rng, 8, 6, 4, 6);
  // Both block indicators lie in the null space of the extended Z, so the
  // truncated symmetric transform keeps the anomalies centered.
  const TransformResult sym =
      shrinkage_update(in.s, in.sa, in.sz, in.r, 0.6, FilterVariant::ShrinkSymmetric, false);
  CHECK(sym.diagnostics.at("anomaly_mean_norm") < 1e-12);

  const TransformResult centered =
      shrinkage_update(in.s, in.sa, in.sz, in.r, 0.6, FilterVariant::ShrinkLowRank, true);
  const Vector member_mean = centered.analysis.members.rowwise().mean();
  CHECK(oracle::rel_err(member_mean, centered.mean) < 1e-12);
}

TEST_CASE("split transform") {
  oracle::Rng rng(48);
  SUBCASE("zero weight") {
    const Instance in = make_instance(rng, 5, 3, 4, 6);
    const SplitTransform t = split_transform(in.s.state, in.s.obs, in.sa, in.sz, in.r, 0.0);
    const EnsembleTransform e = ensemble_transform(in.s.obs, in.r);
    CHECK(oracle::rel_err(t.physical, e.sqrt) < 1e-10);
    CHECK(oracle::rel_err(t.synthetic, Matrix::Identity(6, 6)) < 1e-10);
  }
  SUBCASE("full span instances with a PSD inner matrix") {
    int accepted = 0;
    for (int t = 0; t < 400 && accepted < 40; ++t) {
      const Instance in = make_instance(rng, 3, 3, 6, 4);
      const double gamma = 0.05 + 0.1 * (t % 4);
      const SplitTransform tr = split_transform(in.s.state, in.s.obs, in.sa, in.sz, in.r, gamma);
      if (tr.floored_mass > 0.0) continue;
      ++accepted;
      const Matrix syn = in.sa * tr.synthetic;
      const Matrix phys = in.s.state * tr.physical;
      const Matrix got = gamma * gram(syn) + (1.0 - gamma) * gram(phys);
      const Matrix want =
          oracle::goal_covariance(in.s.state, in.s.obs, in.sa, in.sz, in.r, gamma);
      CHECK(oracle::rel_err(got, want) < 1e-8);

      // the synthetic block alone is an ETKF-style contraction
      const Matrix s = gamma * gram(in.sz) + (1.0 - gamma) * gram(in.s.obs) + in.r;
      const Matrix contraction =
          gram(in.sa) - gamma * in.sa * in.sz.transpose() * s.inverse() * in.sz * in.sa.transpose();
      CHECK(oracle::rel_err(gram(syn), contraction) < 1e-10);
    }
    CHECK(accepted >= 20);
  }
  SUBCASE("undersampled instances report floored mass") {
    double total = 0.0;
    for (int t = 0; t < 20; ++t) {
      const Instance in = make_instance(rng, 8, 6, 4, 5);
      const SplitResult res = split_update(in.s, in.sa, in.sz, in.r, 0.5);
      CHECK(res.result.analysis.members.allFinite());
      CHECK(res.result.analysis.size() == 4);
      total += res.result.diagnostics.at("floored_mass");
    }
    CHECK(total > 0.0);
  }
}

TEST_CASE("full shrinkage pipeline") {
  oracle::Rng rng(49);
  const int n = 12;
  const TargetCovariance p = TargetCovariance::from_covariance(oracle::random_spd(n, rng));
  const Ensemble forecast{oracle::gaussian(n, 5, rng), 0.5};
  const ObservationRecord obs{oracle::gaussian(n, 1, rng), Matrix::Identity(n, n), 0.5};
  const ObservationOperator h = ObservationOperator::identity(n);
  for (FilterVariant v : {FilterVariant::ShrinkSymmetric, FilterVariant::ShrinkLowRank,
                          FilterVariant::ShrinkSplit}) {
    for (GammaPolicy g : {GammaPolicy::rblw(), GammaPolicy::closed_form(),
                          GammaPolicy::fixed(0.85)}) {
      FilterConfig cfg;
      cfg.variant = v;
      cfg.inflation = 1.1;
      cfg.gamma = g;
      cfg.synthetic.size = 20;
      Rng r1(3), r2(3);
      const TransformResult a = analyze(forecast, obs, h, &p, cfg, r1, {});
      const TransformResult b = analyze(forecast, obs, h, &p, cfg, r2, {});
      CHECK(a.analysis.members == b.analysis.members);
      CHECK(a.analysis.size() == 5);
      CHECK(a.analysis.time == 0.5);
      CHECK(a.analysis.members.allFinite());
      CHECK(a.gamma >= 0.0);
      CHECK(a.gamma < 1.0);
      CHECK(a.mu > 0.0);
      if (g.kind == GammaPolicy::Kind::Static) CHECK(a.gamma == 0.85);
    }
  }
  FilterConfig cfg;
  cfg.variant = FilterVariant::ShrinkSymmetric;
  Rng r(1);
  CHECK_THROWS_AS(analyze(forecast, obs, h, nullptr, cfg, r, {}), Error);
}

TEST_CASE("rblw weight one is clamped below the bound") {
  // all members along the target's eigenvectors with equal spread: Û = 0
  const int n = 4;
  const TargetCovariance p = TargetCovariance::from_covariance(Matrix::Identity(n, n));
  Ensemble e{Matrix::Zero(n, 2 * n), 0.0};
  for (int i = 0; i < n; ++i) {
    e.members(i, 2 * i) = 1.0;
    e.members(i, 2 * i + 1) = -1.0;
  }
  const ObservationRecord obs{Vector::Zero(n), Matrix::Identity(n, n), 0.0};
  FilterConfig cfg;
  cfg.variant = FilterVariant::ShrinkSymmetric;
  cfg.synthetic.size = 10;
  Rng rng(2);
  const TransformResult res = analyze(e, obs, ObservationOperator::identity(n), &p, cfg, rng, {});
  CHECK(res.diagnostics.at("gamma_raw") == 1.0);
  CHECK(res.gamma == kGammaCeiling);
  CHECK(res.analysis.members.allFinite());
}

TEST_CASE("letkf limits") {
  oracle::Rng rng(50);
  const int n = 10;
  const Ensemble e{oracle::gaussian(n, 6, rng) * 2.0, 0.0};
  Vector var(n);
  for (int i = 0; i < n; ++i) var(i) = 0.5 + 0.1 * i;
  const ObservationRecord obs{oracle::gaussian(n, 1, rng), Matrix(var.asDiagonal()), 0.0};
  const ObservationOperator h = ObservationOperator::identity(n);
  const DistanceFn dist = [n](Eigen::Index j, Eigen::Index k) {
    return periodic_distance(static_cast<double>(j), static_cast<double>(k), n);
  };
  FilterConfig cfg;
  cfg.variant = FilterVariant::LETKF;
  cfg.inflation = 1.2;

  SUBCASE("infinite radius is the global etkf") {
    cfg.radius = std::numeric_limits<double>::infinity();
    const TransformResult loc = letkf_analysis(e, obs, h, cfg, dist);
    const TransformResult glob = etkf_analysis(e, obs, h, 1.2);
    CHECK(oracle::rel_err(loc.mean, glob.mean) < 1e-9);
    CHECK(oracle::rel_err(loc.analysis.members, glob.analysis.members) < 1e-9);
  }
  SUBCASE("vanishing radius is a scalar update per site") {
    cfg.radius = 1e-9;
    const TransformResult loc = letkf_analysis(e, obs, h, cfg, dist);
    const Decomposition d = decompose(e);
    const Matrix aa = anomalies_of(loc);
    for (int j = 0; j < n; ++j) {
      const double b = 1.44 * d.anomalies.row(j).squaredNorm();
      const double innov = obs.values(j) - d.mean(j);
      CHECK(std::abs(loc.mean(j) - (d.mean(j) + b / (b + var(j)) * innov)) < 1e-9);
      CHECK(std::abs(aa.row(j).squaredNorm() - 1.0 / (1.0 / b + 1.0 / var(j))) < 1e-9);
    }
  }
  SUBCASE("non-diagonal R") {
    ObservationRecord dense = obs;
    dense.error_covariance(0, 1) = dense.error_covariance(1, 0) = 0.1;
    try {
      letkf_analysis(e, dense, h, cfg, dist);
      FAIL("expected an error");
    } catch (const Error& err) {
      CHECK(err.kind() == ErrorKind::UnsupportedObservationError);
    }
  }
  SUBCASE("execution is deterministic") {
    const TransformResult a = letkf_analysis(e, obs, h, cfg, dist);
    const TransformResult b = letkf_analysis(e, obs, h, cfg, dist);
    CHECK(a.analysis.members == b.analysis.members);
  }
}

TEST_CASE("localized shrinkage runs") {
  oracle::Rng rng(51);
  const int n = 12;
  const TargetCovariance p = TargetCovariance::from_covariance(oracle::random_spd(n, rng));
  const Ensemble e{oracle::gaussian(n, 5, rng), 0.0};
  const ObservationRecord obs{oracle::gaussian(n, 1, rng), Matrix::Identity(n, n), 0.0};
  const DistanceFn dist = [n](Eigen::Index j, Eigen::Index k) {
    return periodic_distance(static_cast<double>(j), static_cast<double>(k), n);
  };
  FilterConfig cfg;
  cfg.variant = FilterVariant::ShrinkSymmetric;
  cfg.localize_shrinkage = true;
  cfg.synthetic.size = 10;
  Rng r(4);
  const TransformResult res = analyze(e, obs, ObservationOperator::identity(n), &p, cfg, r, dist);
  CHECK(res.analysis.members.allFinite());
  cfg.variant = FilterVariant::ShrinkLowRank;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("variant names") {
  for (FilterVariant v : {FilterVariant::ETKF, FilterVariant::LETKF, FilterVariant::ShrinkSymmetric,
                          FilterVariant::ShrinkLowRank, FilterVariant::ShrinkSplit}) {
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_variant("enkf"), Error);
}
