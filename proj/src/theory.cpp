#include "minterp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "minterp/interpolator.hpp"
#include "minterp/num_format.hpp"
#include "minterp/parallel.hpp"
#include "minterp/ranks.hpp"
#include "minterp/risk.hpp"

namespace minterp {

using nlohmann::json;

BoundReport bound_terms(const Spectrum& spec, std::size_t n, double b,
                        double delta, double theta_norm, double sigma_y,
                        double tol) {
  if (n < 2) throw ConfigError("bound_terms requires n >= 2");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("bound_terms requires 0 < delta < 1");
  }
  if (!(b > 1.0)) throw ConfigError("bound_terms requires b > 1");

  BoundReport rep;
  rep.n = n;
  rep.b = b;
  rep.delta = delta;
  rep.theta_norm = theta_norm;
  rep.sigma_y = sigma_y;

  const double nd = static_cast<double>(n);
  rep.r0 = effective_rank_r(spec, 0, tol);
  double log_term = std::sqrt(std::log(1.0 / delta) / nd);
  if (rep.r0.is_finite()) {
    double ratio = rep.r0.value() / nd;
    rep.r0_over_n = ExtReal::finite(ratio);
    double envelope = std::max({std::sqrt(ratio), ratio, log_term});
    rep.bias_envelope = ExtReal::finite(theta_norm * theta_norm *
                                        spec.operator_norm() * envelope);
    rep.packing_indicator = ExtReal::finite(
        rep.r0.value() / (nd * std::log1p(rep.r0.value())));
  } else {
    rep.r0_over_n = ExtReal::infinity();
    rep.bias_envelope = ExtReal::infinity();
    rep.packing_indicator = ExtReal::infinity();
  }

  RankProfile prof = rank_profile(spec, n, b, std::nullopt, tol);
  rep.k_star = prof.k_star;
  rep.variance_term = prof.variance_term;
  rep.lower_term = prof.variance_term;

  if (!rep.r0.is_finite()) {
    rep.applicable = false;
    rep.reason = "r_0 diverges";
  } else if (!rep.k_star.finite()) {
    rep.applicable = false;
    rep.reason = "k* infinite: " + rep.k_star.reason;
  } else if (*rep.k_star.k >= n) {
    rep.applicable = false;
    rep.reason = "k* >= n";
  } else {
    rep.applicable = true;
  }
  return rep;
}

json BoundReport::to_json() const {
  json j;
  j["n"] = n;
  j["b"] = b;
  j["delta"] = delta;
  j["theta_norm"] = theta_norm;
  j["sigma_y"] = sigma_y;
  auto put = [&j](const char* key, const ExtReal& v) {
    if (v.is_finite()) {
      j[key] = v.value();
    } else {
      j[key] = format_ext(v);
    }
  };
  put("r0", r0);
  put("r0_over_n", r0_over_n);
  put("bias_envelope", bias_envelope);
  put("variance_term", variance_term);
  put("lower_term", lower_term);
  put("packing_indicator", packing_indicator);
  if (k_star.finite()) {
    j["k_star"] = *k_star.k;
  } else {
    j["k_star"] = "inf";
  }
  j["applicable"] = applicable;
  if (!reason.empty()) j["reason"] = reason;
  return j;
}

// ---------------------------------------------------------------------------
// Benign classification

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Benign:
      return "benign";
    case Verdict::NotBenign:
      return "not-benign";
    case Verdict::OutOfCatalog:
      return "out-of-catalog";
  }
  return {};
}

namespace {

using Form = RateRule::Form;

// rule(n) -> infinity faster than n.
std::optional<bool> rule_is_omega_n(const RateRule& r) {
  switch (r.form) {
    case Form::Const:
      return false;
    case Form::Power:
      return r.c > 0.0 && r.e > 1.0;
    case Form::ExpPower:
      return r.c > 0.0 && r.e > 0.0;
  }
  return std::nullopt;
}

// rule(n) = o(n^K) for K > 0.
std::optional<bool> rule_is_o_power(const RateRule& r, double K) {
  switch (r.form) {
    case Form::Const:
      return true;
    case Form::Power:
      return r.e < K;
    case Form::ExpPower:
      if (r.c < 0.0 && r.e > 0.0) return true;   // decays to zero
      if (r.c > 0.0 && r.e > 0.0) return false;  // superpolynomial growth
      return true;                               // constant
  }
  return std::nullopt;
}

std::optional<bool> rule_is_o_one(const RateRule& r) {
  switch (r.form) {
    case Form::Const:
      return false;
    case Form::Power:
      return r.e < 0.0;
    case Form::ExpPower:
      return r.c < 0.0 && r.e > 0.0;
  }
  return std::nullopt;
}

// rule(n) * n -> infinity, i.e. rule = omega(1/n).
std::optional<bool> rule_is_omega_inv_n(const RateRule& r) {
  switch (r.form) {
    case Form::Const:
      return r.c > 0.0;
    case Form::Power:
      return r.c > 0.0 && r.e > -1.0;
    case Form::ExpPower:
      if (r.c > 0.0 && r.e > 0.0) return true;
      if (r.c < 0.0 && r.e > 0.0) return false;  // beats any power of n
      return true;                               // constant exp(c)
  }
  return std::nullopt;
}

void add_condition(BenignVerdict& v, const std::string& name, bool sat) {
  v.conditions.push_back(BenignCondition{name, sat});
}

bool all_satisfied(const BenignVerdict& v) {
  return std::all_of(v.conditions.begin(), v.conditions.end(),
                     [](const BenignCondition& c) { return c.satisfied; });
}

}  // namespace

BenignVerdict benign_classify(const FamilySpec& family) {
  BenignVerdict v;
  using Variant = FamilySpec::Variant;
  switch (family.variant) {
    case Variant::PolyLog: {
      v.rule = "polylog: benign iff alpha = 1 and beta > 1";
      add_condition(v, "alpha = 1", family.alpha == 1.0);
      add_condition(v, "beta > 1", family.beta > 1.0);
      v.verdict = all_satisfied(v) ? Verdict::Benign : Verdict::NotBenign;
      return v;
    }
    case Variant::Exponent: {
      v.rule = "exponent: benign iff omega(1/n) = alpha_n = o(1)";
      auto lower = rule_is_omega_inv_n(family.alpha_n);
      auto upper = rule_is_o_one(family.alpha_n);
      if (!lower || !upper) return v;  // out of catalog
      add_condition(v, "alpha_n = omega(1/n)", *lower);
      add_condition(v, "alpha_n = o(1)", *upper);
      v.verdict = all_satisfied(v) ? Verdict::Benign : Verdict::NotBenign;
      return v;
    }
    case Variant::TruncatedPoly: {
      v.rule =
          "truncpoly: benign iff (0 < alpha < 1, p_n = omega(n), "
          "p_n = o(n^(1/(1-alpha)))) or (alpha = 1, p_n = exp(omega(sqrt n)), "
          "p_n = exp(o(n)))";
      if (family.alpha > 1.0) {
        add_condition(v, "alpha <= 1", false);
        v.verdict = Verdict::NotBenign;
        return v;
      }
      if (family.alpha == 1.0) {
        // Needs exponentially growing dimension.
        bool exp_lower = family.p_n.form == Form::ExpPower &&
                         family.p_n.c > 0.0 && family.p_n.e > 0.5;
        bool exp_upper = family.p_n.form != Form::ExpPower ||
                         family.p_n.c <= 0.0 || family.p_n.e < 1.0;
        add_condition(v, "p_n = exp(omega(sqrt n))", exp_lower);
        add_condition(v, "p_n = exp(o(n))", exp_upper);
        v.verdict = all_satisfied(v) ? Verdict::Benign : Verdict::NotBenign;
        return v;
      }
      auto growth = rule_is_omega_n(family.p_n);
      auto cap = rule_is_o_power(family.p_n, 1.0 / (1.0 - family.alpha));
      if (!growth || !cap) return v;
      add_condition(v, "p_n = omega(n)", *growth);
      add_condition(v, "p_n = o(n^(1/(1-alpha)))", *cap);
      v.verdict = all_satisfied(v) ? Verdict::Benign : Verdict::NotBenign;
      return v;
    }
    case Variant::ExpPlusIso: {
      v.rule =
          "expiso: benign iff p_n = omega(n) and "
          "n exp(-o(n)) = eps_n p_n = o(n)";
      if (family.eps_n.form == Form::ExpPower &&
          family.p_n.form == Form::ExpPower) {
        return v;  // competing exponentials are not resolved symbolically
      }
      auto growth = rule_is_omega_n(family.p_n);
      if (!growth) return v;
      // eps_n * p_n as a symbolic product. Rules that are asymptotically
      // polynomial expose an exponent; at most one factor may be genuinely
      // exponential.
      auto poly_exponent = [](const RateRule& r) -> std::optional<double> {
        switch (r.form) {
          case Form::Const:
            return 0.0;
          case Form::Power:
            return r.e;
          case Form::ExpPower:
            if (r.c == 0.0 || r.e <= 0.0) return 0.0;  // tends to a constant
            return std::nullopt;
        }
        return std::nullopt;
      };
      auto eps_exp = poly_exponent(family.eps_n);
      auto p_exp = poly_exponent(family.p_n);
      bool product_small;     // eps_n p_n = o(n)
      bool product_not_tiny;  // eps_n p_n = n exp(-o(n))
      if (eps_exp && p_exp) {
        product_small = *eps_exp + *p_exp < 1.0;
        // Polynomial products sit within exp(O(log n)) of n, and log n = o(n).
        product_not_tiny = true;
      } else {
        const RateRule& exp_rule =
            eps_exp ? family.p_n : family.eps_n;
        if (exp_rule.c < 0.0) {
          product_small = true;  // superpolynomial decay
          product_not_tiny = exp_rule.e < 1.0;
        } else {
          product_small = false;  // superpolynomial growth
          product_not_tiny = true;
        }
      }
      add_condition(v, "p_n = omega(n)", *growth);
      add_condition(v, "eps_n p_n = o(n)", product_small);
      add_condition(v, "eps_n p_n = n exp(-o(n))", product_not_tiny);
      v.verdict = all_satisfied(v) ? Verdict::Benign : Verdict::NotBenign;
      return v;
    }
    case Variant::Geometric: {
      // Fixed spectrum with sup_k r_k finite: r_k >= bn eventually fails for
      // every k, so k*_n = infinity for large n.
      v.rule = "bounded-rank: fixed spectrum with bounded r_k is never benign";
      add_condition(v, "r_k unbounded in n", false);
      v.verdict = Verdict::NotBenign;
      return v;
    }
    case Variant::Constant: {
      // r_0/n -> 0 forces p_n = o(n), but r_k <= p_n, so k* = infinity once
      // p_n < bn. The two benign limits are incompatible for flat spectra.
      v.rule =
          "constant: r_0/n -> 0 requires p_n = o(n), which forces "
          "k* = infinity";
      add_condition(v, "p_n = o(n) and k* finite simultaneously", false);
      v.verdict = Verdict::NotBenign;
      return v;
    }
  }
  return v;
}

json BenignVerdict::to_json() const {
  json j;
  j["verdict"] = verdict_name(verdict);
  j["rule"] = rule;
  json conds = json::array();
  for (const auto& c : conditions) {
    conds.push_back({{"name", c.name}, {"satisfied", c.satisfied}});
  }
  j["conditions"] = std::move(conds);
  return j;
}

// ---------------------------------------------------------------------------
// Benign scan

namespace {

double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  double pos = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

ScanTable benign_scan(const FamilySpec& family,
                      std::span<const std::size_t> n_grid, double b,
                      std::size_t seeds, std::size_t replicas, double sigma,
                      double theta_norm, CoordinateDist z_dist,
                      std::uint64_t base_seed, int threads) {
  if (n_grid.empty()) throw ConfigError("benign_scan needs a nonempty n grid");
  if (replicas < 1) throw ConfigError("benign_scan requires replicas >= 1");

  ScanTable table;
  table.family = family;
  table.b = b;
  table.seeds = seeds;
  table.replicas = replicas;
  table.sigma = sigma;
  table.theta_norm = theta_norm;
  table.base_seed = base_seed;
  table.verdict = benign_classify(family);

  const bool run_mc = family.finite_dimensional() && seeds > 0;

  for (std::size_t n : n_grid) {
    Spectrum spec = family.instantiate(n);
    ScanRow row;
    row.n = n;

    ExtReal r0 = effective_rank_r(spec, 0);
    double nd = static_cast<double>(n);
    row.r0_over_n = r0.is_finite() ? ExtReal::finite(r0.value() / nd)
                                   : ExtReal::infinity();
    RankProfile prof = rank_profile(spec, n, b);
    if (prof.k_star.finite()) {
      std::size_t kstar = *prof.k_star.k;
      row.kstar_over_n = ExtReal::finite(static_cast<double>(kstar) / nd);
      ExtReal R = effective_rank_R(spec, kstar);
      row.n_over_Rkstar = R.is_infinite() ? ExtReal::finite(0.0)
                                          : ExtReal::finite(nd / R.value());
    } else {
      row.kstar_over_n = ExtReal::infinity();
      row.n_over_Rkstar = ExtReal::undefined();
    }

    if (run_mc) {
      std::size_t p = spec.finite_dimension().value();
      std::vector<double> per_seed(seeds,
                                   std::numeric_limits<double>::quiet_NaN());
      std::vector<std::size_t> failures(seeds, 0);
      parallel_for(seeds, threads, [&](std::size_t s) {
        std::uint64_t cell = child_seed(
            child_seed(base_seed, Stream::Probe, n), Stream::Design, s);
        RegressionInstance inst;
        inst.spectrum = spec;
        inst.n = n;
        inst.theta_star = make_theta_star(
            p, theta_norm, ThetaMode::UniformDirection, cell);
        inst.sigma = sigma;
        inst.z_dist = z_dist;
        inst.seed = cell;
        std::vector<double> draws;
        draws.reserve(replicas);
        for (std::size_t rep = 0; rep < replicas; ++rep) {
          DesignMatrix design = sample_design(inst, rep);
          Eigen::VectorXd eps = sample_noise(inst, rep);
          Eigen::VectorXd y = design.X * inst.theta_star + eps;
          try {
            FitResult fit = min_norm_fit(design.X, y, inst.rcond);
            draws.push_back(
                excess_risk(fit.theta_hat, inst.theta_star, inst.spectrum));
          } catch (const GramSingular&) {
            // p < n (or a rank-deficient design): the estimator is the
            // general least-squares solution; counted as a degenerate fit.
            FitResult fit = min_norm_fit_degenerate(design.X, y, inst.rcond);
            draws.push_back(
                excess_risk(fit.theta_hat, inst.theta_star, inst.spectrum));
            ++failures[s];
          }
        }
        if (!draws.empty()) {
          per_seed[s] =
              pairwise_sum(draws) / static_cast<double>(draws.size());
        }
      });
      std::vector<double> kept;
      for (std::size_t s = 0; s < seeds; ++s) {
        if (!std::isnan(per_seed[s])) kept.push_back(per_seed[s]);
        row.degenerate_draws += failures[s];
      }
      row.seeds = kept.size();
      if (!kept.empty()) {
        std::sort(kept.begin(), kept.end());
        row.mc_median = quantile(kept, 0.5);
        row.mc_iqr = quantile(kept, 0.75) - quantile(kept, 0.25);
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string ScanTable::to_csv() const {
  std::string out =
      "n,r0_over_n,kstar_over_n,n_over_Rkstar,mc_median,mc_iqr,seeds\n";
  for (const auto& row : rows) {
    out += csv_row({std::to_string(row.n), format_ext(row.r0_over_n),
                    format_ext(row.kstar_over_n),
                    format_ext(row.n_over_Rkstar),
                    row.mc_median ? format_double(*row.mc_median) : "n/a",
                    row.mc_iqr ? format_double(*row.mc_iqr) : "n/a",
                    std::to_string(row.seeds)});
  }
  return out;
}

json ScanTable::sidecar_json() const {
  json j;
  j["family"] = family.to_json();
  j["b"] = b;
  j["seeds"] = seeds;
  j["replicas"] = replicas;
  j["sigma"] = sigma;
  j["theta_norm"] = theta_norm;
  j["base_seed"] = base_seed;
  j["verdict"] = verdict.to_json();
  return j;
}

}  // namespace minterp
