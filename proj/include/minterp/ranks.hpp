#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "minterp/common.hpp"
#include "minterp/spectrum.hpp"

namespace minterp {

// Serves tail sums for a whole k-range in O(1) per query: exact partial sums
// over a cached eigenvalue prefix plus a single bracketed remainder past it.
class TailSeries {
 public:
  TailSeries(const Spectrum& spec, std::size_t k_max, double tol = 1e-8);

  // sum_{i>k} lambda_i^power for k <= k_max.
  TailSum tail(std::size_t k, int power) const;
  // lambda_i for i <= k_max + 1.
  double lambda(std::size_t i) const { return lam_.at(i - 1); }
  std::size_t k_max() const { return k_max_; }

 private:
  std::size_t k_max_;
  std::vector<double> lam_;               // lambda_1 .. lambda_{k_max+1}
  std::vector<double> suffix1_, suffix2_; // sums over the cached prefix
  TailSum rem1_, rem2_;                   // mass past the cached prefix
};

// r_k = (sum_{i>k} lambda_i) / lambda_{k+1}; infinite when the tail diverges.
// Throws RankUndefined when lambda_{k+1} = 0.
ExtReal effective_rank_r(const Spectrum& spec, std::size_t k,
                         double tol = 1e-8);

// R_k = (sum_{i>k} lambda_i)^2 / sum_{i>k} lambda_i^2; infinite whenever the
// numerator tail diverges.
ExtReal effective_rank_R(const Spectrum& spec, std::size_t k,
                         double tol = 1e-8);

// Default scan horizon min(10n, spectrum length).
std::size_t default_k_max(const Spectrum& spec, std::size_t n);

// Smallest k in [0, k_max] with r_k >= b*n, scanning upward; the infinity
// sentinel carries the reason the scan came up empty.
KStar k_star(const Spectrum& spec, std::size_t n, double b, std::size_t k_max,
             double tol = 1e-8);

struct SymmetryFactors {
  std::size_t rank = 0;
  double s = 0.0;  // (mean lambda) / lambda_1
  double S = 0.0;  // (mean lambda)^2 / mean(lambda^2)
};

// Decomposes r_0 = rank * s and R_0 = rank * S for finite-rank spectra.
SymmetryFactors symmetry_factors(const Spectrum& spec);

struct RankIdentityReport {
  bool applicable = false;  // false when a tail diverges
  std::size_t k = 0;
  double r = 0.0;     // r_k(Sigma)
  double R = 0.0;     // R_k(Sigma)
  double r_sq = 0.0;  // r_k(Sigma^2)
  double identity_residual = 0.0;  // |r^2 - r_sq * R| / r^2
  bool r_at_least_one = false;
  bool chain_rsq_le_r = false;
  bool chain_r_le_R = false;
  bool chain_R_le_r2 = false;
  bool pass(double tol) const;
};

// Evaluates r_k >= 1, the ordering chain r_k(Sigma^2) <= r_k <= R_k <= r_k^2
// and the product identity r_k^2 = r_k(Sigma^2) R_k.
RankIdentityReport rank_identities_check(const Spectrum& spec, std::size_t k,
                                         double tol = 1e-8);

// phi(k) = k/(b^2 n) + n/R_k (the n/R term drops when R_k is infinite).
double phi(const Spectrum& spec, std::size_t k, std::size_t n, double b,
           double tol = 1e-8);

struct PhiViolation {
  std::size_t k = 0;
  double phi_k = 0.0, phi_next = 0.0, r_k = 0.0;
};

struct PhiReport {
  std::size_t checked = 0;  // number of k with r_k > bn examined
  std::vector<PhiViolation> violations;
};

// Flags every k <= k_max - 1 with r_k > bn where phi fails to increase.
PhiReport phi_monotone_check(const Spectrum& spec, std::size_t n, double b,
                             std::size_t k_max, double tol = 1e-8);

struct VarianceMinimizer {
  std::size_t l_min = 0;
  double value = 0.0;
  std::size_t k_star = 0;
  double reference = 0.0;  // k*/(bn) + bn/R_{k*}
  bool matches_reference = false;
};

// Brute-force minimum over l <= k* of l/(bn) + bn sum_{i>l} lambda_i^2 /
// (lambda_{k*+1} r_{k*})^2; the minimizer is expected at l = k*.
VarianceMinimizer variance_term_minimizer(const Spectrum& spec, std::size_t n,
                                          double b, double tol = 1e-8);

struct RankProfile {
  std::size_t n = 0;
  double b = 5.0;
  std::size_t k_max = 0;
  // Rows for k = 0, 1, ... while lambda_{k+1} > 0 (may stop before k_max).
  std::vector<ExtReal> r;
  std::vector<ExtReal> R;
  KStar k_star;
  ExtReal variance_term;  // k*/n + n/R_{k*}, defined when k* is finite

  std::string to_csv() const;  // columns k,r_k,R_k; "inf" for sentinels
  nlohmann::json header_json() const;
};

RankProfile rank_profile(const Spectrum& spec, std::size_t n, double b,
                         std::optional<std::size_t> k_max = std::nullopt,
                         double tol = 1e-8);

}  // namespace minterp
