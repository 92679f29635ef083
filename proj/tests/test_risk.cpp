#include <cmath>
#include <random>

#include <doctest.h>

#include "minterp/interpolator.hpp"
#include "minterp/risk.hpp"
#include "oracles.hpp"

using namespace minterp;

namespace {

RegressionInstance make_instance(Spectrum spec, std::size_t n,
                                 Eigen::VectorXd theta_star, double sigma,
                                 CoordinateDist dist, std::uint64_t seed) {
  RegressionInstance inst;
  inst.spectrum = std::move(spec);
  inst.n = n;
  inst.theta_star = std::move(theta_star);
  inst.sigma = sigma;
  inst.z_dist = dist;
  inst.seed = seed;
  return inst;
}

}  // namespace

TEST_SUITE_BEGIN("risk");

TEST_CASE("excess risk closed forms and a Monte Carlo oracle") {
  Spectrum s = Spectrum::from_values({2, 1});
  Eigen::VectorXd theta(2), star(2);
  theta << 1, 1;
  star << 1, 1;
  CHECK(excess_risk(theta, star, s) == 0.0);
  star << 0, 0;
  CHECK(excess_risk(theta, star, s) == 3.0);

  Eigen::VectorXd bad(3);
  CHECK_THROWS_AS(excess_risk(theta, bad, s), DimensionMismatch);

  // E_x (x^T delta)^2 estimated directly.
  std::mt19937 rng(41);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> lam{1.7, 0.9, 0.2, 0.05};
  Spectrum spec = Spectrum::from_values(lam);
  Eigen::VectorXd delta(4);
  delta << 0.3, -1.1, 0.7, 2.0;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  double analytic = excess_risk(delta, zero, spec);
  const int draws = 100'000;
  double sum = 0.0, sum_sq = 0.0;
  for (int d = 0; d < draws; ++d) {
    double inner = 0.0;
    for (int j = 0; j < 4; ++j) {
      inner += std::sqrt(lam[static_cast<std::size_t>(j)]) * gauss(rng) *
               delta[j];
    }
    double v = inner * inner;
    sum += v;
    sum_sq += v * v;
  }
  double mc = sum / draws;
  double se = std::sqrt((sum_sq / draws - mc * mc) / draws);
  CHECK(std::abs(mc - analytic) <= 3.0 * se);
}

TEST_CASE("bias term: projector annihilates the row space") {
  std::mt19937 rng(43);
  Eigen::MatrixXd X = oracles::random_matrix(rng, 5, 11);
  Spectrum spec = Spectrum::from_values(
      oracles::random_spectrum_values(rng, 11, /*allow_zero_tail=*/false));
  Eigen::VectorXd row = X.row(2);
  double scale = spec.eigenvalue(1) * row.squaredNorm();
  CHECK(bias_term(X, spec, row) <= 1e-16 * scale);

  // theta* orthogonal to the row space with Sigma = I: bias = |theta*|^2.
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(3, 6);
  E(0, 0) = E(1, 1) = E(2, 2) = 1.0;
  Spectrum eye = Spectrum::constant(6);
  Eigen::VectorXd off = Eigen::VectorXd::Zero(6);
  off[4] = 2.5;
  CHECK(bias_term(E, eye, off) == doctest::Approx(6.25).epsilon(1e-14));

  // Dense oracle.
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd A = oracles::random_matrix(rng, 6, 13);
    auto lam = oracles::random_spectrum_values(rng, 13, false);
    Spectrum sp = Spectrum::from_values(lam);
    Eigen::VectorXd theta = oracles::random_matrix(rng, 13, 1);
    double fast = bias_term(A, sp, theta);
    double dense = oracles::dense_bias(A, lam, theta);
    CHECK(fast == doctest::Approx(dense).epsilon(1e-10));
  }
}

TEST_CASE("variance trace: direct path") {
  // Orthogonal design rows sqrt(n) e_i with Sigma = I gives tr(C) = 1.
  std::size_t n = 8;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, 20);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, i) = std::sqrt(static_cast<double>(n));
  }
  CHECK(variance_trace_direct(X, Spectrum::constant(20)) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // Dense oracle on random instances.
  std::mt19937 rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd A = oracles::random_matrix(rng, 6, 14);
    auto lam = oracles::random_spectrum_values(rng, 14, false);
    Spectrum sp = Spectrum::from_values(lam);
    double fast = variance_trace_direct(A, sp);
    double dense = oracles::dense_trace_c(A, lam);
    CHECK(fast == doctest::Approx(dense).epsilon(1e-10));
  }

  // Isotropic aspect-ratio-2 designs keep tr(C) within a broad window.
  int inside = 0;
  const int seeds = 30;
  for (int seed = 0; seed < seeds; ++seed) {
    RegressionInstance inst = make_instance(
        Spectrum::constant(100), 50, Eigen::VectorXd::Zero(100), 1.0,
        CoordinateDist::Gaussian, static_cast<std::uint64_t>(seed));
    DesignMatrix d = sample_design(inst);
    double trace = variance_trace_direct(d.X, inst.spectrum);
    if (trace > 0.1 && trace < 10.0) ++inside;
  }
  CHECK(inside >= 29);
}

TEST_CASE("variance trace: z representation agrees with the direct path") {
  // 1x1 case by hand: C = lambda / x^2.
  Eigen::MatrixXd X(1, 1);
  X << 0.7;
  Spectrum one = Spectrum::from_values({0.3});
  double expect = 0.3 / (0.7 * 0.7);
  CHECK(variance_trace_direct(X, one) ==
        doctest::Approx(expect).epsilon(1e-12));
  CHECK(variance_trace_z(X, one).total ==
        doctest::Approx(expect).epsilon(1e-12));

  std::mt19937 rng(53);
  for (CoordinateDist dist :
       {CoordinateDist::Gaussian, CoordinateDist::Rademacher,
        CoordinateDist::ScaledUniform}) {
    for (int trial = 0; trial < 5; ++trial) {
      std::size_t n = 8 + rng() % 24;
      std::size_t p = 2 * n + rng() % (3 * n);
      RegressionInstance inst = make_instance(
          Spectrum::exp_plus_iso(1.0, 0.05, p), n,
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), 1.0, dist,
          rng());
      DesignMatrix d = sample_design(inst);
      double direct = variance_trace_direct(d.X, inst.spectrum);
      TraceZResult z = variance_trace_z(d.X, inst.spectrum);
      CHECK(std::abs(direct - z.total) <= 1e-8 * std::max(direct, 1.0));
    }
  }

  // Per-direction rank-one-update identity on a 5x8 instance.
  RegressionInstance inst = make_instance(
      Spectrum::from_values({1.0, 0.8, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1}), 5,
      Eigen::VectorXd::Zero(8), 1.0, CoordinateDist::Gaussian, 61);
  DesignMatrix d = sample_design(inst);
  std::vector<std::size_t> indices{1, 2, 3, 4, 5, 6, 7, 8};
  TraceZResult z = variance_trace_z(d.X, inst.spectrum, indices);
  REQUIRE(z.checks.size() == 8);
  for (const auto& c : z.checks) {
    REQUIRE_FALSE(c.skipped);
    CHECK(std::abs(c.lhs - c.rhs) <=
          1e-10 * std::max({std::abs(c.lhs), std::abs(c.rhs), 1e-30}));
  }
  // The per-term values add up to the total.
  double sum = 0.0;
  for (const auto& c : z.checks) sum += c.lhs;
  CHECK(sum == doctest::Approx(z.total).epsilon(1e-10));
}

TEST_CASE("mc_risk: exact decomposition is the oracle") {
  // sigma = 0 with theta* in the row space: every replica interpolates
  // exactly, so the risk vanishes.
  std::mt19937 rng(67);
  std::size_t n = 12, p = 30;
  Spectrum spec = Spectrum::exp_plus_iso(1.0, 0.1, p);
  RegressionInstance inst = make_instance(
      spec, n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), 0.0,
      CoordinateDist::Gaussian, 71);
  DesignMatrix d = sample_design(inst);
  inst.theta_star = d.X.row(3);
  RiskReport clean = mc_risk(inst, 8, McMode::FixedDesign);
  double scale = inst.theta_star.squaredNorm();
  CHECK(clean.bias_term.value() <= 1e-14 * scale);
  CHECK(clean.mc_mean <= 1e-14 * scale);

  // theta* = 0, sigma = 1: mean risk estimates sigma^2 tr(C).
  RegressionInstance noise_only = make_instance(
      spec, n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), 1.0,
      CoordinateDist::Gaussian, 73);
  RiskReport r0 = mc_risk(noise_only, 2000, McMode::FixedDesign);
  CHECK(std::abs(r0.mc_mean - r0.trace_c.value()) <= 3.0 * r0.mc_stderr);
  CHECK(std::abs(r0.trace_c.value() - r0.trace_c_alt.value()) <=
        1e-8 * std::max(r0.trace_c.value(), 1.0));

  // Nonzero theta*: bias + sigma^2 tr(C).
  RegressionInstance full = noise_only;
  full.theta_star = make_theta_star(p, 1.0, ThetaMode::UniformDirection, 5);
  RiskReport r1 = mc_risk(full, 2000, McMode::FixedDesign);
  CHECK(std::abs(r1.mc_mean - r1.expected_risk_given_X.value()) <=
        3.0 * r1.mc_stderr);
  CHECK(r1.bias_term.value() >= 0.0);

  // Full-resample mode runs and fills only the MC fields.
  RiskReport fr = mc_risk(full, 16, McMode::FullResample);
  CHECK_FALSE(fr.bias_term.has_value());
  CHECK(fr.mc_mean > 0.0);
  CHECK(fr.failed == 0);

  (void)rng;
}

TEST_CASE("mc_risk: determinism and thread invariance") {
  std::size_t p = 40;
  RegressionInstance inst = make_instance(
      Spectrum::exp_plus_iso(1.0, 0.05, p), 16,
      make_theta_star(p, 1.0, ThetaMode::UniformDirection, 2), 1.0,
      CoordinateDist::Gaussian, 79);
  RiskReport a = mc_risk(inst, 64, McMode::FullResample, 1);
  RiskReport b = mc_risk(inst, 64, McMode::FullResample, 1);
  RiskReport c = mc_risk(inst, 64, McMode::FullResample, 4);
  CHECK(a.mc_mean == b.mc_mean);
  CHECK(a.mc_stderr == b.mc_stderr);
  CHECK(a.mc_mean == c.mc_mean);
  CHECK(a.mc_stderr == c.mc_stderr);
}

TEST_CASE("mc_risk: singular replicas abort past the failure cap") {
  // n > p makes every Gram singular in full-resample mode.
  RegressionInstance inst = make_instance(Spectrum::constant(3), 6,
                                          Eigen::VectorXd::Zero(3), 1.0,
                                          CoordinateDist::Gaussian, 83);
  CHECK_THROWS_AS(mc_risk(inst, 10, McMode::FullResample), NotApplicable);
  CHECK_THROWS_AS(mc_risk(inst, 10, McMode::FixedDesign), GramSingular);
  CHECK_THROWS_AS(mc_risk(inst, 1, McMode::FullResample), ConfigError);
}

TEST_CASE("eigenvalue concentration probe") {
  // Isotropic with heavy overparameterization: both ratios are O(1).
  std::size_t n = 50;
  ConcentrationProbe iso = eigen_concentration_probe(
      Spectrum::constant(50 * n), n, 0, 20, CoordinateDist::Gaussian, 3);
  CHECK(iso.rows.size() == 20);
  CHECK(iso.lo_min >= 0.1);
  CHECK(iso.hi_max <= 10.0);

  // Rank-one tail: mu_n collapses to zero for n >= 2.
  Spectrum small = Spectrum::from_values({1.0, 0.5, 0.25});
  ConcentrationProbe rank1 = eigen_concentration_probe(
      small, 4, 2, 5, CoordinateDist::Gaussian, 7);
  for (const auto& row : rank1.rows) {
    CHECK(std::abs(row.mu_n) <= 1e-12 * std::max(row.mu_1, 1.0));
  }

  // Out-of-regime spectrum: the probe records without claiming bounds.
  ConcentrationProbe geo = eigen_concentration_probe(
      truncate(Spectrum::geometric(0.5), 200).spectrum, 20, 0, 5,
      CoordinateDist::Gaussian, 11);
  CHECK(geo.rows.size() == 5);
  for (const auto& row : geo.rows) {
    CHECK(row.ratio_lo >= -1e-12);
    CHECK(row.ratio_hi > 0.0);
  }

  CHECK_THROWS_AS(eigen_concentration_probe(Spectrum::geometric(0.5), 10, 0,
                                            3),
                  ConfigError);
}

TEST_SUITE_END();
