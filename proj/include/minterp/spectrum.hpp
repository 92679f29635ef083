#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "minterp/common.hpp"

namespace minterp {

// Symbolic map n -> value used for family parameters that scale with the
// sample size (p_n, eps_n, alpha_n). The closed catalog of forms keeps
// asymptotic verdicts (omega/o conditions) decidable on the exponents.
struct RateRule {
  enum class Form {
    Const,     // c
    Power,     // c * n^e
    ExpPower,  // exp(c * n^e)
  };

  Form form = Form::Const;
  double c = 0.0;
  double e = 0.0;

  static RateRule constant(double c);
  static RateRule power(double c, double e);
  static RateRule exp_power(double c, double e);

  double operator()(double n) const;
  std::string str() const;

  // Accepts "0.5", "n^1.5", "2*n^-0.5", "exp(0.5*n^0.5)".
  static RateRule parse(const std::string& text);

  bool operator==(const RateRule&) const = default;
};

// Sum of an eigenvalue tail, exact or bracketed. `divergent` marks tails the
// integral test proves infinite; the numeric fields are meaningless then.
struct TailSum {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool exact = true;
  bool divergent = false;
};

// Nonincreasing nonnegative eigenvalue sequence of a covariance operator,
// either an explicit finite list or a parametric family with analytic tails.
// Immutable after construction; all operations are pure.
class Spectrum {
 public:
  enum class Kind { Explicit, Family };
  enum class Family {
    PolyLog,        // lambda_i = i^-alpha * ln^-beta(i+1)
    Exponent,       // lambda_i = i^-(1+alpha)
    TruncatedPoly,  // lambda_i = i^-alpha for i <= p, else 0
    ExpPlusIso,     // lambda_i = exp(-i/tau) + eps for i <= p, else 0
    Geometric,      // lambda_i = q^i
    Constant,       // lambda_i = 1 for i <= p, else 0
  };

  // Sorts nonincreasing when needed (reordered() reports that) and rejects
  // negative entries with the 1-based offending index.
  static Spectrum from_values(std::vector<double> values);

  static Spectrum poly_log(double alpha, double beta);
  static Spectrum exponent(double alpha);
  static Spectrum truncated_poly(double alpha, std::size_t p);
  static Spectrum exp_plus_iso(double tau, double eps, std::size_t p);
  static Spectrum geometric(double q);
  static Spectrum constant(std::size_t p);

  Kind kind() const { return kind_; }
  Family family() const { return family_; }
  bool reordered() const { return reordered_; }

  // lambda_i for 1-based i; zero past the end of finite spectra.
  double eigenvalue(std::size_t i) const;

  // sum_{i>k} lambda_i^power for power in {1,2}. Exact where a closed form or
  // a complete finite sum exists; otherwise a partial sum plus an
  // integral-test bracket with (upper-lower)/value <= tol, growing the number
  // of summed terms up to max_terms before giving up with BracketTooWide.
  TailSum tail_sum(std::size_t k, int power, double tol = 1e-8,
                   std::size_t max_terms = kDefaultMaxTailTerms) const;

  // Number of stored/defined eigenvalues (nullopt for infinite families).
  std::optional<std::size_t> finite_dimension() const;
  // Number of strictly positive eigenvalues (nullopt when infinite).
  std::optional<std::size_t> finite_rank() const;

  double operator_norm() const { return eigenvalue(1); }

  const std::vector<double>& values() const { return values_; }
  double param_alpha() const { return alpha_; }
  double param_beta() const { return beta_; }
  double param_tau() const { return tau_; }
  double param_eps() const { return eps_; }
  double param_q() const { return q_; }
  std::size_t param_p() const { return p_; }

  std::string variant_name() const;
  nlohmann::json to_json() const;
  static Spectrum from_json(const nlohmann::json& j);

  // Empty explicit spectrum; valid instances come from the factories.
  Spectrum() = default;

 private:
  Kind kind_ = Kind::Explicit;
  Family family_ = Family::Constant;
  std::vector<double> values_;  // Explicit only
  bool reordered_ = false;
  double alpha_ = 0, beta_ = 0, tau_ = 0, eps_ = 0, q_ = 0;
  std::size_t p_ = 0;
};

// First p eigenvalues as a dense vector (zero-padded past finite spectra).
std::vector<double> materialize(const Spectrum& spec, std::size_t p);

struct Truncation {
  Spectrum spectrum;  // explicit, length p
  TailSum discarded;  // mass past index p
};

Truncation truncate(const Spectrum& spec, std::size_t p, double tol = 1e-8);

// Eigenvalue sequence realizing a prescribed effective-rank sequence:
// lambda_k = u_{k-1}^-1 prod_{i<k-1}(1 - u_i^-1), normalized to total mass 1.
// Values are emitted in construction order, which is not necessarily
// nonincreasing; `monotone` reports whether it is.
struct RankSequenceResult {
  std::vector<double> values;
  double tail_mass = 0.0;      // analytic mass past the emitted prefix
  double log_tail_mass = 0.0;  // exact in log space even when tail_mass
                               // underflows
  std::vector<double> realized_r;  // r_k of the emitted prefix + tail_mass
  bool monotone = true;

  // Valid covariance spectrum view (sorted when construction order was not
  // monotone; Spectrum::reordered() flags that).
  Spectrum spectrum() const;
};

RankSequenceResult spectrum_from_ranks(std::span<const double> u,
                                       std::size_t m);

// Symbolic family description: the variant plus rate rules for the
// n-dependent parameters. instantiate() resolves the rules at a concrete
// sample size and yields a Spectrum.
struct FamilySpec {
  enum class Variant {
    PolyLog,
    Exponent,
    TruncatedPoly,
    ExpPlusIso,
    Geometric,
    Constant
  };

  Variant variant = Variant::Constant;
  double alpha = 0.0;  // PolyLog / TruncatedPoly
  double beta = 0.0;   // PolyLog
  double tau = 0.0;    // ExpPlusIso
  double q = 0.0;      // Geometric
  RateRule alpha_n;    // Exponent
  RateRule eps_n;      // ExpPlusIso
  RateRule p_n;        // TruncatedPoly / ExpPlusIso / Constant

  static FamilySpec poly_log(double alpha, double beta);
  static FamilySpec exponent(RateRule alpha_n);
  static FamilySpec truncated_poly(double alpha, RateRule p_n);
  static FamilySpec exp_plus_iso(double tau, RateRule eps_n, RateRule p_n);
  static FamilySpec geometric(double q);
  static FamilySpec constant(RateRule p_n);
  static FamilySpec constant(std::size_t p);

  // Resolves the rate rules at sample size n. Families without rules ignore n.
  Spectrum instantiate(std::size_t n) const;
  bool depends_on_n() const;
  // Instantiations have finitely many nonzero eigenvalues.
  bool finite_dimensional() const;

  std::string variant_name() const;
  std::string str() const;

  // "constant:p=10", "geometric:q=0.5", "polylog:alpha=1,beta=2",
  // "exponent:alpha=n^-0.5", "truncpoly:alpha=0.5,p=n^1.5",
  // "expiso:tau=1,eps=1e-3,p=1000".
  static FamilySpec parse(const std::string& text);

  nlohmann::json to_json() const;
};

}  // namespace minterp
