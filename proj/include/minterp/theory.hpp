#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "minterp/common.hpp"
#include "minterp/sampling.hpp"
#include "minterp/spectrum.hpp"

namespace minterp {

struct BoundReport {
  std::size_t n = 0;
  double b = 5.0;
  double delta = 0.1;
  double theta_norm = 1.0;
  double sigma_y = 1.0;

  ExtReal r0;
  ExtReal r0_over_n;
  // theta_norm^2 * lambda_1 * max{sqrt(r0/n), r0/n, sqrt(ln(1/delta)/n)};
  // constant-free, no universal c applied.
  ExtReal bias_envelope;
  KStar k_star;
  ExtReal variance_term;  // k*/n + n/R_{k*}
  ExtReal lower_term;     // the lower bound shares the same expression
  // r0 / (n ln(1 + r0)), reported raw; the packing-based lower bound is only
  // indicated, never asserted.
  ExtReal packing_indicator;
  bool applicable = false;  // k* finite and k* < n
  std::string reason;

  nlohmann::json to_json() const;
};

BoundReport bound_terms(const Spectrum& spec, std::size_t n, double b,
                        double delta, double theta_norm, double sigma_y,
                        double tol = 1e-8);

enum class Verdict { Benign, NotBenign, OutOfCatalog };

std::string verdict_name(Verdict v);

struct BenignCondition {
  std::string name;
  bool satisfied = false;
};

struct BenignVerdict {
  Verdict verdict = Verdict::OutOfCatalog;
  std::string rule;  // which catalog rule decided, stated as the iff itself
  std::vector<BenignCondition> conditions;

  nlohmann::json to_json() const;
};

// Decides benignness symbolically on the family's rate rules; rate forms the
// catalog cannot resolve yield OutOfCatalog rather than a guess.
BenignVerdict benign_classify(const FamilySpec& family);

struct ScanRow {
  std::size_t n = 0;
  ExtReal r0_over_n;
  ExtReal kstar_over_n;
  ExtReal n_over_Rkstar;
  std::optional<double> mc_median;
  std::optional<double> mc_iqr;
  std::size_t seeds = 0;
  std::size_t degenerate_draws = 0;
};

struct ScanTable {
  FamilySpec family;
  double b = 5.0;
  std::size_t seeds = 0;
  std::size_t replicas = 0;
  double sigma = 1.0;
  double theta_norm = 1.0;
  std::uint64_t base_seed = 0;
  BenignVerdict verdict;
  std::vector<ScanRow> rows;

  // columns n,r0_over_n,kstar_over_n,n_over_Rkstar,mc_median,mc_iqr,seeds
  std::string to_csv() const;
  nlohmann::json sidecar_json() const;
};

// Analytic benign-limit columns per grid point and, for finite-dimensional
// families, median full-resample Monte Carlo excess risk across seeds.
// Infinite-dimensional families get analytic columns only (mc rendered n/a).
ScanTable benign_scan(const FamilySpec& family,
                      std::span<const std::size_t> n_grid, double b,
                      std::size_t seeds, std::size_t replicas, double sigma,
                      double theta_norm,
                      CoordinateDist z_dist = CoordinateDist::Gaussian,
                      std::uint64_t base_seed = 0, int threads = 1);

}  // namespace minterp
