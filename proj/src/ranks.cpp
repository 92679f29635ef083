#include "minterp/ranks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "minterp/num_format.hpp"

namespace minterp {

using nlohmann::json;

namespace {

// Scans ask for the remainder relative to the smallest tail they serve; when
// that is unreachable within the term cap, the achieved bracket is still the
// best available statement and the callers carry its width.
TailSum remainder_or_achieved(const Spectrum& spec, std::size_t k, int power,
                              double tol) {
  try {
    return spec.tail_sum(k, power, tol);
  } catch (const BracketTooWide& e) {
    return TailSum{0.5 * (e.lower() + e.upper()), e.lower(), e.upper(), false,
                   false};
  }
}

}  // namespace

TailSeries::TailSeries(const Spectrum& spec, std::size_t k_max, double tol)
    : k_max_(k_max) {
  const std::size_t cached = k_max + 1;
  lam_ = materialize(spec, cached);
  rem1_ = remainder_or_achieved(spec, cached, 1, tol);
  rem2_ = remainder_or_achieved(spec, cached, 2, tol);
  suffix1_.assign(cached + 1, 0.0);
  suffix2_.assign(cached + 1, 0.0);
  for (std::size_t i = cached; i > 0; --i) {
    suffix1_[i - 1] = suffix1_[i] + lam_[i - 1];
    suffix2_[i - 1] = suffix2_[i] + lam_[i - 1] * lam_[i - 1];
  }
}

TailSum TailSeries::tail(std::size_t k, int power) const {
  if (k > k_max_ + 1) throw ConfigError("TailSeries queried past its range");
  const TailSum& rem = power == 1 ? rem1_ : rem2_;
  if (rem.divergent) return rem;
  double head = power == 1 ? suffix1_[k] : suffix2_[k];
  return TailSum{head + rem.value, head + rem.lower, head + rem.upper,
                 rem.exact, false};
}

ExtReal effective_rank_r(const Spectrum& spec, std::size_t k, double tol) {
  double lam = spec.eigenvalue(k + 1);
  if (!(lam > 0.0)) throw RankUndefined(k);
  TailSum t = spec.tail_sum(k, 1, tol);
  if (t.divergent) return ExtReal::infinity();
  return ExtReal::finite(t.value / lam);
}

ExtReal effective_rank_R(const Spectrum& spec, std::size_t k, double tol) {
  double lam = spec.eigenvalue(k + 1);
  if (!(lam > 0.0)) throw RankUndefined(k);
  TailSum t1 = spec.tail_sum(k, 1, tol);
  // A divergent tail forces R_k -> infinity: (sum)^2/sum-of-squares dominates
  // sum/lambda_{k+1}, which is unbounded.
  if (t1.divergent) return ExtReal::infinity();
  TailSum t2 = spec.tail_sum(k, 2, tol);
  return ExtReal::finite(t1.value * t1.value / t2.value);
}

std::size_t default_k_max(const Spectrum& spec, std::size_t n) {
  std::size_t cap = 10 * n;
  if (auto dim = spec.finite_dimension()) cap = std::min(cap, *dim);
  return cap;
}

namespace {

struct RankPoint {
  bool defined = false;   // lambda_{k+1} > 0
  ExtReal r, R;
};

RankPoint rank_point(const TailSeries& series, std::size_t k) {
  RankPoint out;
  double lam = series.lambda(k + 1);
  if (!(lam > 0.0)) return out;
  out.defined = true;
  TailSum t1 = series.tail(k, 1);
  if (t1.divergent) {
    out.r = ExtReal::infinity();
    out.R = ExtReal::infinity();
    return out;
  }
  out.r = ExtReal::finite(t1.value / lam);
  TailSum t2 = series.tail(k, 2);
  out.R = ExtReal::finite(t1.value * t1.value / t2.value);
  return out;
}

KStar scan_k_star(const TailSeries& series, std::size_t n, double b,
                  std::size_t k_max) {
  double threshold = b * static_cast<double>(n);
  for (std::size_t k = 0; k <= k_max; ++k) {
    if (!(series.lambda(k + 1) > 0.0)) {
      return KStar{std::nullopt, "finite rank below bn"};
    }
    TailSum t1 = series.tail(k, 1);
    if (t1.divergent) return KStar{k, {}};
    if (t1.value / series.lambda(k + 1) >= threshold) return KStar{k, {}};
  }
  return KStar{std::nullopt, "r_k < bn for all k <= k_max"};
}

}  // namespace

KStar k_star(const Spectrum& spec, std::size_t n, double b, std::size_t k_max,
             double tol) {
  if (n < 1) throw ConfigError("k_star requires n >= 1");
  if (!(b > 1.0)) throw ConfigError("k_star requires b > 1");
  TailSeries series(spec, k_max, tol);
  return scan_k_star(series, n, b, k_max);
}

SymmetryFactors symmetry_factors(const Spectrum& spec) {
  auto rank = spec.finite_rank();
  if (!rank) throw FiniteRankRequired();
  if (*rank < 1) throw FiniteRankRequired();
  std::size_t p = *rank;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 1; i <= p; ++i) {
    double lam = spec.eigenvalue(i);
    sum += lam;
    sum_sq += lam * lam;
  }
  double pd = static_cast<double>(p);
  double mean = sum / pd;
  SymmetryFactors out;
  out.rank = p;
  out.s = mean / spec.eigenvalue(1);
  out.S = mean * mean / (sum_sq / pd);
  return out;
}

bool RankIdentityReport::pass(double tol) const {
  return applicable && r_at_least_one && chain_rsq_le_r && chain_r_le_R &&
         chain_R_le_r2 && identity_residual <= tol;
}

RankIdentityReport rank_identities_check(const Spectrum& spec, std::size_t k,
                                         double tol) {
  double lam = spec.eigenvalue(k + 1);
  if (!(lam > 0.0)) throw RankUndefined(k);
  RankIdentityReport rep;
  rep.k = k;
  TailSum t1 = spec.tail_sum(k, 1, tol);
  if (t1.divergent) return rep;  // inapplicable
  TailSum t2 = spec.tail_sum(k, 2, tol);
  rep.applicable = true;
  rep.r = t1.value / lam;
  rep.R = t1.value * t1.value / t2.value;
  rep.r_sq = t2.value / (lam * lam);
  rep.identity_residual =
      std::abs(rep.r * rep.r - rep.r_sq * rep.R) / (rep.r * rep.r);
  // Chain comparisons get an fp cushion; the identities are exact in real
  // arithmetic.
  double slack = 64.0 * std::numeric_limits<double>::epsilon();
  rep.r_at_least_one = rep.r >= 1.0 - slack;
  rep.chain_rsq_le_r = rep.r_sq <= rep.r * (1.0 + slack);
  rep.chain_r_le_R = rep.r <= rep.R * (1.0 + slack);
  rep.chain_R_le_r2 = rep.R <= rep.r * rep.r * (1.0 + slack);
  return rep;
}

double phi(const Spectrum& spec, std::size_t k, std::size_t n, double b,
           double tol) {
  double nd = static_cast<double>(n);
  double head = static_cast<double>(k) / (b * b * nd);
  ExtReal R = effective_rank_R(spec, k, tol);
  if (R.is_infinite()) return head;  // n/R_k vanishes
  return head + nd / R.value();
}

PhiReport phi_monotone_check(const Spectrum& spec, std::size_t n, double b,
                             std::size_t k_max, double tol) {
  PhiReport rep;
  if (k_max == 0) return rep;
  TailSeries series(spec, k_max, tol);
  double nd = static_cast<double>(n);
  double threshold = b * nd;
  auto phi_at = [&](const RankPoint& pt, std::size_t k) {
    double head = static_cast<double>(k) / (b * b * nd);
    if (pt.R.is_infinite()) return head;
    return head + nd / pt.R.value();
  };
  RankPoint cur = rank_point(series, 0);
  for (std::size_t k = 0; k + 1 <= k_max; ++k) {
    if (!cur.defined) break;
    RankPoint next = rank_point(series, k + 1);
    if (!next.defined) break;
    bool premise = cur.r.is_infinite() ||
                   (cur.r.is_finite() && cur.r.value() > threshold);
    if (premise) {
      ++rep.checked;
      double pk = phi_at(cur, k);
      double pn = phi_at(next, k + 1);
      // Tiny relative cushion so fp noise on analytic near-ties does not
      // masquerade as a violation.
      if (pn - pk <= -1e-12 * std::max(pk, 1e-300)) {
        rep.violations.push_back(
            PhiViolation{k, pk, pn, cur.r.value_or(HUGE_VAL)});
      }
    }
    cur = next;
  }
  return rep;
}

VarianceMinimizer variance_term_minimizer(const Spectrum& spec, std::size_t n,
                                          double b, double tol) {
  std::size_t k_max = default_k_max(spec, n);
  TailSeries series(spec, k_max, tol);
  KStar ks = scan_k_star(series, n, b, k_max);
  if (!ks.finite()) {
    throw NotApplicable("variance-term minimizer needs a finite k*: " +
                        ks.reason);
  }
  std::size_t kstar = *ks.k;
  double bn = b * static_cast<double>(n);
  TailSum t1 = series.tail(kstar, 1);
  if (t1.divergent) {
    throw NotApplicable("variance-term minimizer needs a convergent tail");
  }
  double denom = t1.value * t1.value;  // (lambda_{k*+1} r_{k*})^2

  VarianceMinimizer out;
  out.k_star = kstar;
  double best = HUGE_VAL;
  for (std::size_t l = 0; l <= kstar; ++l) {
    double val =
        static_cast<double>(l) / bn + bn * series.tail(l, 2).value / denom;
    if (val <= best) {  // ties resolve toward the largest l
      best = val;
      out.l_min = l;
    }
  }
  out.value = best;
  TailSum t2 = series.tail(kstar, 2);
  double Rk = denom / t2.value;
  out.reference = static_cast<double>(kstar) / bn + bn / Rk;
  out.matches_reference =
      out.l_min == kstar &&
      std::abs(out.value - out.reference) <= 1e-8 * out.reference;
  return out;
}

RankProfile rank_profile(const Spectrum& spec, std::size_t n, double b,
                         std::optional<std::size_t> k_max, double tol) {
  if (n < 1) throw ConfigError("rank profile requires n >= 1");
  if (!(b > 1.0)) throw ConfigError("rank profile requires b > 1");
  RankProfile prof;
  prof.n = n;
  prof.b = b;
  prof.k_max = k_max.value_or(default_k_max(spec, n));
  TailSeries series(spec, prof.k_max, tol);
  for (std::size_t k = 0; k <= prof.k_max; ++k) {
    RankPoint pt = rank_point(series, k);
    if (!pt.defined) break;
    prof.r.push_back(pt.r);
    prof.R.push_back(pt.R);
  }
  prof.k_star = scan_k_star(series, n, b, prof.k_max);
  if (prof.k_star.finite()) {
    std::size_t kstar = *prof.k_star.k;
    RankPoint pt = rank_point(series, kstar);
    double nd = static_cast<double>(n);
    if (pt.R.is_infinite()) {
      prof.variance_term = ExtReal::finite(static_cast<double>(kstar) / nd);
    } else {
      prof.variance_term =
          ExtReal::finite(static_cast<double>(kstar) / nd + nd / pt.R.value());
    }
  }
  return prof;
}

std::string RankProfile::to_csv() const {
  std::string out = "k,r_k,R_k\n";
  for (std::size_t k = 0; k < r.size(); ++k) {
    out += csv_row({std::to_string(k), format_ext(r[k]), format_ext(R[k])});
  }
  return out;
}

json RankProfile::header_json() const {
  json j;
  j["n"] = n;
  j["b"] = b;
  if (k_star.finite()) {
    j["k_star"] = *k_star.k;
  } else {
    j["k_star"] = "inf";
    j["k_star_reason"] = k_star.reason;
  }
  if (variance_term.is_finite()) {
    j["variance_term"] = variance_term.value();
  } else {
    j["variance_term"] = "inf";
  }
  return j;
}

}  // namespace minterp
