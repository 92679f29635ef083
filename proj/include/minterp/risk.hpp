#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "minterp/common.hpp"
#include "minterp/sampling.hpp"
#include "minterp/spectrum.hpp"

namespace minterp {

// (theta - theta_star)^T Sigma (theta - theta_star) in the eigenbasis.
double excess_risk(const Eigen::VectorXd& theta,
                   const Eigen::VectorXd& theta_star, const Spectrum& spec);

// theta_star^T B theta_star with B = (I - P) Sigma (I - P), P the projector
// onto the row space of X. Computed through p-vectors and one n-solve; the
// p x p projector is never formed.
double bias_term(const Eigen::MatrixXd& X, const Spectrum& spec,
                 const Eigen::VectorXd& theta_star, double rcond = 1e-10);

// tr(C) with C = (XX^T)^-1 X Sigma X^T (XX^T)^-1, via two n x n solves
// against X Sigma X^T.
double variance_trace_direct(const Eigen::MatrixXd& X, const Spectrum& spec,
                             double rcond = 1e-10);

struct SmwCheck {
  std::size_t index = 0;  // 1-based eigendirection
  double lhs = 0.0;       // lambda_i^2 z_i^T A^-2 z_i
  double rhs = 0.0;       // lambda_i^2 z_i^T A_-i^-2 z_i / (1 + lambda_i z_i^T A_-i^-1 z_i)^2
  bool skipped = false;   // A_-i not positive definite
};

struct TraceZResult {
  double total = 0.0;
  std::vector<SmwCheck> checks;
};

// tr(C) as the z-representation sum over eigendirections,
// sum_i lambda_i^2 z_i^T A^-2 z_i with A = XX^T, restricted to nonzero
// eigenvalues. For each requested index the rank-one-update identity is
// evaluated on both sides.
TraceZResult variance_trace_z(const Eigen::MatrixXd& X, const Spectrum& spec,
                              std::span<const std::size_t> smw_indices = {},
                              double rcond = 1e-10);

enum class McMode { FixedDesign, FullResample };

std::string mode_name(McMode m);
McMode parse_mode(const std::string& name);

struct RiskReport {
  // Exact conditional decomposition; populated in FixedDesign mode.
  std::optional<double> bias_term;
  std::optional<double> trace_c;
  std::optional<double> trace_c_alt;
  std::optional<double> expected_risk_given_X;

  double mc_mean = 0.0;
  double mc_stderr = 0.0;
  std::size_t replicas = 0;
  std::size_t failed = 0;
  McMode mode = McMode::FixedDesign;
  std::uint64_t seed = 0;
  double sigma = 0.0;

  nlohmann::json to_json() const;
};

// Monte Carlo excess risk. FixedDesign draws one X and resamples the noise;
// FullResample draws a fresh (X, eps) pair per replica. Replicas whose Gram
// turns singular are excluded and counted; more than 10% of them aborts.
RiskReport mc_risk(const RegressionInstance& inst, std::size_t replicas,
                   McMode mode, int threads = 1);

struct ProbeRow {
  std::uint64_t seed_index = 0;
  double mu_1 = 0.0;
  double mu_n = 0.0;
  double ratio_hi = 0.0;  // mu_1 / (tail + lambda_{k+1} n)
  double ratio_lo = 0.0;  // mu_n / (tail + lambda_{k+1} n)
};

struct ConcentrationProbe {
  std::size_t n = 0, k = 0;
  double scale = 0.0;  // sum_{i>k} lambda_i + lambda_{k+1} n
  std::vector<ProbeRow> rows;
  double lo_min = 0.0, lo_median = 0.0, lo_max = 0.0;
  double hi_min = 0.0, hi_median = 0.0, hi_max = 0.0;

  nlohmann::json to_json() const;
};

// Forms A_k = sum_{i>k} lambda_i z_i z_i^T per seed and records its extreme
// eigenvalues against the tail-plus-spike scale. Reports only; no pass/fail
// claim outside the concentration regime.
ConcentrationProbe eigen_concentration_probe(
    const Spectrum& spec, std::size_t n, std::size_t k, std::size_t seeds,
    CoordinateDist dist = CoordinateDist::Gaussian, std::uint64_t base_seed = 0,
    int threads = 1);

}  // namespace minterp
