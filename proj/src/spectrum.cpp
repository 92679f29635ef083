#include "minterp/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "minterp/num_format.hpp"

namespace minterp {

using nlohmann::json;

// ---------------------------------------------------------------------------
// RateRule

RateRule RateRule::constant(double c) { return RateRule{Form::Const, c, 0.0}; }
RateRule RateRule::power(double c, double e) {
  return RateRule{Form::Power, c, e};
}
RateRule RateRule::exp_power(double c, double e) {
  return RateRule{Form::ExpPower, c, e};
}

double RateRule::operator()(double n) const {
  switch (form) {
    case Form::Const:
      return c;
    case Form::Power:
      return c * std::pow(n, e);
    case Form::ExpPower:
      return std::exp(c * std::pow(n, e));
  }
  return c;
}

std::string RateRule::str() const {
  switch (form) {
    case Form::Const:
      return format_double(c);
    case Form::Power:
      if (c == 1.0) return "n^" + format_double(e);
      return format_double(c) + "*n^" + format_double(e);
    case Form::ExpPower:
      return "exp(" + format_double(c) + "*n^" + format_double(e) + ")";
  }
  return {};
}

namespace {

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, e - b + 1);
}

// Parses "c", "n", "n^e", "c*n", "c*n^e".
RateRule parse_power_form(const std::string& text) {
  auto npos = text.find('n');
  if (npos == std::string::npos) {
    return RateRule::constant(parse_double(text));
  }
  double c = 1.0;
  if (npos > 0) {
    std::string head = text.substr(0, npos);
    if (head.empty() || head.back() != '*') {
      throw ConfigError("cannot parse rate rule: '" + text + "'");
    }
    c = parse_double(head.substr(0, head.size() - 1));
  }
  std::string rest = text.substr(npos + 1);
  double e = 1.0;
  if (!rest.empty()) {
    if (rest[0] != '^') {
      throw ConfigError("cannot parse rate rule: '" + text + "'");
    }
    e = parse_double(rest.substr(1));
  }
  return RateRule::power(c, e);
}

}  // namespace

RateRule RateRule::parse(const std::string& raw) {
  std::string text = strip(raw);
  if (text.empty()) throw ConfigError("empty rate rule");
  if (text.rfind("exp(", 0) == 0 && text.back() == ')') {
    RateRule inner = parse_power_form(text.substr(4, text.size() - 5));
    if (inner.form == Form::Const) return exp_power(inner.c, 0.0);
    return exp_power(inner.c, inner.e);
  }
  return parse_power_form(text);
}

// ---------------------------------------------------------------------------
// Spectrum construction

Spectrum Spectrum::from_values(std::vector<double> values) {
  if (values.empty()) throw ConfigError("explicit spectrum must be nonempty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0 || std::isnan(values[i])) {
      throw NegativeEigenvalue(i + 1);
    }
  }
  Spectrum s;
  s.kind_ = Kind::Explicit;
  if (!std::is_sorted(values.begin(), values.end(), std::greater<double>())) {
    std::stable_sort(values.begin(), values.end(), std::greater<double>());
    s.reordered_ = true;
  }
  s.values_ = std::move(values);
  return s;
}

Spectrum Spectrum::poly_log(double alpha, double beta) {
  if (!(alpha > 0.0)) throw InvalidFamily("polylog requires alpha > 0");
  if (beta < 0.0) {
    // Growing log factor: the sequence may increase over an initial stretch.
    // i^alpha * ln^beta(i+1) is nondecreasing past exp(-beta/alpha); verify
    // the discrete prefix up to there and refuse what cannot be certified.
    double x0 = std::exp(-beta / alpha);
    if (x0 > 1e6) {
      throw InvalidFamily(
          "polylog(alpha=" + format_double(alpha) +
          ", beta=" + format_double(beta) +
          ") is not nonincreasing over a certifiable prefix");
    }
    auto lam = [&](double i) {
      return std::pow(i, -alpha) * std::pow(std::log(i + 1.0), -beta);
    };
    std::size_t limit = static_cast<std::size_t>(x0) + 2;
    for (std::size_t i = 1; i <= limit; ++i) {
      if (lam(double(i)) < lam(double(i + 1))) {
        throw InvalidFamily("polylog eigenvalues increase at index " +
                            std::to_string(i));
      }
    }
  }
  Spectrum s;
  s.kind_ = Kind::Family;
  s.family_ = Family::PolyLog;
  s.alpha_ = alpha;
  s.beta_ = beta;
  return s;
}

Spectrum Spectrum::exponent(double alpha) {
  if (!(alpha > 0.0)) throw InvalidFamily("exponent requires alpha > 0");
  Spectrum s;
  s.kind_ = Kind::Family;
  s.family_ = Family::Exponent;
  s.alpha_ = alpha;
  return s;
}

Spectrum Spectrum::truncated_poly(double alpha, std::size_t p) {
  if (!(alpha > 0.0)) throw InvalidFamily("truncpoly requires alpha > 0");
  if (p < 1) throw InvalidFamily("truncpoly requires p >= 1");
  Spectrum s;
  s.kind_ = Kind::Family;
  s.family_ = Family::TruncatedPoly;
  s.alpha_ = alpha;
  s.p_ = p;
  return s;
}

Spectrum Spectrum::exp_plus_iso(double tau, double eps, std::size_t p) {
  if (!(tau > 0.0)) throw InvalidFamily("expiso requires tau > 0");
  if (!(eps > 0.0)) throw InvalidFamily("expiso requires eps > 0");
  if (p < 1) throw InvalidFamily("expiso requires p >= 1");
  Spectrum s;
  s.kind_ = Kind::Family;
  s.family_ = Family::ExpPlusIso;
  s.tau_ = tau;
  s.eps_ = eps;
  s.p_ = p;
  return s;
}

Spectrum Spectrum::geometric(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidFamily("geometric requires 0 < q < 1");
  }
  Spectrum s;
  s.kind_ = Kind::Family;
  s.family_ = Family::Geometric;
  s.q_ = q;
  return s;
}

Spectrum Spectrum::constant(std::size_t p) {
  if (p < 1) throw InvalidFamily("constant requires p >= 1");
  Spectrum s;
  s.kind_ = Kind::Family;
  s.family_ = Family::Constant;
  s.p_ = p;
  return s;
}

// ---------------------------------------------------------------------------
// Eigenvalues

double Spectrum::eigenvalue(std::size_t i) const {
  if (i < 1) throw ConfigError("eigenvalue index must be >= 1");
  double x = static_cast<double>(i);
  if (kind_ == Kind::Explicit) {
    return i <= values_.size() ? values_[i - 1] : 0.0;
  }
  switch (family_) {
    case Family::PolyLog:
      return std::pow(x, -alpha_) * std::pow(std::log(x + 1.0), -beta_);
    case Family::Exponent:
      return std::pow(x, -(1.0 + alpha_));
    case Family::TruncatedPoly:
      return i <= p_ ? std::pow(x, -alpha_) : 0.0;
    case Family::ExpPlusIso:
      return i <= p_ ? std::exp(-x / tau_) + eps_ : 0.0;
    case Family::Geometric:
      return std::pow(q_, x);
    case Family::Constant:
      return i <= p_ ? 1.0 : 0.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Tail sums

namespace {

struct Interval {
  double lo = 0.0, hi = 0.0;
};

// Kahan-compensated accumulator; the partial sums feeding brackets can run to
// a million terms.
struct Accum {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    double y = v - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

TailSum exact_sum(double v) { return TailSum{v, v, v, true, false}; }

TailSum divergent_sum() { return TailSum{0.0, 0.0, 0.0, false, true}; }

// Bracket of integral_t^inf x^-a ln^-b(x+1) dx for a > 1, via repeated
// integration by parts. Each step trades the log exponent b for b+1 and a
// correction a factor ~ b/((a-1)ln t) smaller; negative b (growing logs)
// must climb to b >= 0, positive b recurses while the factor still shrinks,
// and the base bound is I in [lead * (1 - b/((a-1)ln(t+1))), lead].
Interval polylog_integral(double a, double b, double t, int levels) {
  double log_t1 = std::log(t + 1.0);
  double lead = std::pow(t, 1.0 - a) / (a - 1.0) * std::pow(log_t1, -b);
  if (b == 0.0) return {lead, lead};
  double factor = b / ((a - 1.0) * log_t1);
  if (b > 0.0 && (levels <= 0 || factor >= 1.0)) {
    return {lead * std::max(0.0, 1.0 - factor), lead};
  }
  Interval inner = polylog_integral(a, b + 1.0, t, levels - 1);
  double scale = std::abs(b) / (a - 1.0);
  double shrink = t / (t + 1.0);
  if (b > 0.0) {
    return {std::max(0.0, lead - scale * inner.hi),
            lead - scale * shrink * inner.lo};
  }
  return {lead + scale * shrink * inner.lo, lead + scale * inner.hi};
}

// Remainder sum_{i>M} i^-a ln^-b(i+1), bracketed by the integral test with
// closed-form envelopes. Requires the continuous integrand to be
// nonincreasing past M (guaranteed by the caller).
Interval polylog_remainder(double a, double b, std::size_t M) {
  double m = static_cast<double>(M);
  if (b == 0.0) {
    // Pure power: convexity gives a much tighter midpoint/trapezoid pair.
    auto integral = [a](double t) { return std::pow(t, 1.0 - a) / (a - 1.0); };
    double f_next = std::pow(m + 1.0, -a);
    return {integral(m + 1.0) + 0.5 * f_next, integral(m + 0.5)};
  }
  if (a == 1.0) {
    // f(x) = 1/(x ln^b(x+1)) is convex here, so the midpoint rule bounds the
    // sum from above and the trapezoid rule from below; the integrals use the
    // envelope 1/(x ln^b x) with an explicit correction for the ln(x+1) gap,
    // integral_t 1/(x ln^b x) dx = ln^(1-b)(t)/(b-1).
    auto env = [b](double t) {
      return std::pow(std::log(t), 1.0 - b) / (b - 1.0);
    };
    double f_next =
        1.0 / ((m + 1.0) * std::pow(std::log(m + 2.0), b));
    double gap =
        b / ((m + 1.0) * std::pow(std::log(m + 1.0), b + 1.0));
    double lo = env(m + 1.0) - gap + 0.5 * f_next;
    double hi = env(m + 0.5);
    return {lo, hi};
  }
  Interval lo_i = polylog_integral(a, b, m + 1.0, 48);
  Interval hi_i = polylog_integral(a, b, m, 48);
  return {lo_i.lo, hi_i.hi};
}

// Infinite polylog-type tail sum_{i>k} i^-a ln^-b(i+1), a partial sum plus a
// bracketed remainder, growing the partial until the bracket meets tol.
TailSum polylog_tail(std::size_t k, double a, double b, double tol,
                     std::size_t max_terms) {
  if (a < 1.0 || (a == 1.0 && b <= 1.0)) return divergent_sum();
  auto term = [a, b](std::size_t i) {
    double x = static_cast<double>(i);
    return std::pow(x, -a) * std::pow(std::log(x + 1.0), -b);
  };
  // Point past which the continuous integrand is provably nonincreasing.
  std::size_t monotone_from = 1;
  if (b < 0.0) {
    monotone_from = static_cast<std::size_t>(std::exp(-b / a)) + 2;
  }

  Accum partial;
  std::size_t summed = 0;
  std::size_t target = 1024;
  while (k + target < monotone_from) target *= 2;  // first bracket point
  for (;;) {
    target = std::min(target, max_terms);
    while (summed < target) {
      ++summed;
      partial.add(term(k + summed));
    }
    std::size_t M = k + summed;
    Interval rem = polylog_remainder(a, b, M);
    double lower = partial.sum + rem.lo;
    double upper = partial.sum + rem.hi;
    double value = partial.sum + 0.5 * (rem.lo + rem.hi);
    if (upper - lower <= tol * value) {
      return TailSum{value, lower, upper, false, false};
    }
    if (summed >= max_terms) throw BracketTooWide(lower, upper, summed);
    target = summed * 2;
  }
}

// Finite power tail sum_{i=k+1}^{p} i^-a: summed outright when affordable,
// otherwise a partial sum plus a convexity bracket on the inner range.
TailSum truncated_power_tail(std::size_t k, std::size_t p, double a,
                             double tol, std::size_t max_terms) {
  if (p <= k) return exact_sum(0.0);
  std::size_t count = p - k;
  auto term = [a](std::size_t i) {
    return std::pow(static_cast<double>(i), -a);
  };
  if (count <= max_terms) {
    Accum sum;  // ascending magnitudes
    for (std::size_t i = p; i > k; --i) sum.add(term(i));
    return exact_sum(sum.sum);
  }
  auto integral = [a](double lo, double hi) {
    if (a == 1.0) return std::log(hi) - std::log(lo);
    return (std::pow(hi, 1.0 - a) - std::pow(lo, 1.0 - a)) / (1.0 - a);
  };
  Accum partial;
  std::size_t summed = 0;
  std::size_t target = 1024;
  double pd = static_cast<double>(p);
  for (;;) {
    target = std::min(target, max_terms);
    while (summed < target) {
      ++summed;
      partial.add(term(k + summed));
    }
    double m = static_cast<double>(k + summed);
    double rem_lo =
        integral(m + 1.0, pd) + 0.5 * (term(k + summed + 1) + term(p));
    double rem_hi = integral(m + 0.5, pd + 0.5);
    double lower = partial.sum + rem_lo;
    double upper = partial.sum + rem_hi;
    double value = partial.sum + 0.5 * (rem_lo + rem_hi);
    if (upper - lower <= tol * value) {
      return TailSum{value, lower, upper, false, false};
    }
    if (summed >= max_terms) throw BracketTooWide(lower, upper, summed);
    target = summed * 2;
  }
}

// sum_{i=lo}^{hi} rho^i for 0 < rho < 1.
double geometric_range(double rho, std::size_t lo, std::size_t hi) {
  if (hi < lo) return 0.0;
  double head = std::pow(rho, static_cast<double>(lo));
  double len = static_cast<double>(hi - lo + 1);
  return head * (-std::expm1(len * std::log(rho))) / (1.0 - rho);
}

}  // namespace

TailSum Spectrum::tail_sum(std::size_t k, int power, double tol,
                           std::size_t max_terms) const {
  if (power != 1 && power != 2) throw ConfigError("tail power must be 1 or 2");
  if (!(tol > 0.0)) throw ConfigError("tail tolerance must be positive");
  const double w = static_cast<double>(power);

  if (kind_ == Kind::Explicit) {
    Accum sum;
    for (std::size_t i = values_.size(); i > k; --i) {
      double v = values_[i - 1];
      sum.add(power == 1 ? v : v * v);
    }
    return exact_sum(sum.sum);
  }

  switch (family_) {
    case Family::Constant:
      return exact_sum(p_ > k ? static_cast<double>(p_ - k) : 0.0);
    case Family::Geometric: {
      double rho = std::pow(q_, w);
      double head = std::pow(rho, static_cast<double>(k + 1));
      return exact_sum(head / (1.0 - rho));
    }
    case Family::ExpPlusIso: {
      if (p_ <= k) return exact_sum(0.0);
      double m = static_cast<double>(p_ - k);
      double r1 = std::exp(-1.0 / tau_);
      if (power == 1) {
        return exact_sum(geometric_range(r1, k + 1, p_) + m * eps_);
      }
      double r2 = std::exp(-2.0 / tau_);
      return exact_sum(geometric_range(r2, k + 1, p_) +
                       2.0 * eps_ * geometric_range(r1, k + 1, p_) +
                       m * eps_ * eps_);
    }
    case Family::TruncatedPoly:
      return truncated_power_tail(k, p_, w * alpha_, tol, max_terms);
    case Family::Exponent:
      return polylog_tail(k, w * (1.0 + alpha_), 0.0, tol, max_terms);
    case Family::PolyLog:
      return polylog_tail(k, w * alpha_, w * beta_, tol, max_terms);
  }
  return exact_sum(0.0);
}

std::optional<std::size_t> Spectrum::finite_dimension() const {
  if (kind_ == Kind::Explicit) return values_.size();
  switch (family_) {
    case Family::Constant:
    case Family::TruncatedPoly:
    case Family::ExpPlusIso:
      return p_;
    default:
      return std::nullopt;
  }
}

std::optional<std::size_t> Spectrum::finite_rank() const {
  if (kind_ == Kind::Explicit) {
    std::size_t rank = values_.size();
    while (rank > 0 && values_[rank - 1] <= 0.0) --rank;
    return rank;
  }
  return finite_dimension();  // family values are strictly positive up to p
}

std::string Spectrum::variant_name() const {
  if (kind_ == Kind::Explicit) return "explicit";
  switch (family_) {
    case Family::PolyLog:
      return "polylog";
    case Family::Exponent:
      return "exponent";
    case Family::TruncatedPoly:
      return "truncpoly";
    case Family::ExpPlusIso:
      return "expiso";
    case Family::Geometric:
      return "geometric";
    case Family::Constant:
      return "constant";
  }
  return {};
}

// ---------------------------------------------------------------------------
// Serialization

json Spectrum::to_json() const {
  json j;
  if (kind_ == Kind::Explicit) {
    j["kind"] = "explicit";
    j["variant"] = "explicit";
    json vals = json::array();
    for (double v : values_) vals.push_back(format_double(v));
    j["values"] = std::move(vals);
    if (reordered_) j["reordered"] = true;
    return j;
  }
  j["kind"] = "family";
  j["variant"] = variant_name();
  json params = json::object();
  switch (family_) {
    case Family::PolyLog:
      params["alpha"] = format_double(alpha_);
      params["beta"] = format_double(beta_);
      break;
    case Family::Exponent:
      params["alpha"] = format_double(alpha_);
      break;
    case Family::TruncatedPoly:
      params["alpha"] = format_double(alpha_);
      params["p"] = p_;
      break;
    case Family::ExpPlusIso:
      params["tau"] = format_double(tau_);
      params["eps"] = format_double(eps_);
      params["p"] = p_;
      break;
    case Family::Geometric:
      params["q"] = format_double(q_);
      break;
    case Family::Constant:
      params["p"] = p_;
      break;
  }
  j["params"] = std::move(params);
  return j;
}

namespace {

double json_number(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

}  // namespace

Spectrum Spectrum::from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "explicit") {
    std::vector<double> values;
    for (const auto& v : j.at("values")) values.push_back(json_number(v));
    return from_values(std::move(values));
  }
  if (kind != "family") throw ConfigError("unknown spectrum kind: " + kind);
  std::string variant = j.at("variant").get<std::string>();
  const json& p = j.at("params");
  if (variant == "polylog") {
    return poly_log(json_number(p.at("alpha")), json_number(p.at("beta")));
  }
  if (variant == "exponent") return exponent(json_number(p.at("alpha")));
  if (variant == "truncpoly") {
    return truncated_poly(json_number(p.at("alpha")),
                          p.at("p").get<std::size_t>());
  }
  if (variant == "expiso") {
    return exp_plus_iso(json_number(p.at("tau")), json_number(p.at("eps")),
                        p.at("p").get<std::size_t>());
  }
  if (variant == "geometric") return geometric(json_number(p.at("q")));
  if (variant == "constant") return constant(p.at("p").get<std::size_t>());
  throw ConfigError("unknown spectrum variant: " + variant);
}

// ---------------------------------------------------------------------------
// Derived constructions

std::vector<double> materialize(const Spectrum& spec, std::size_t p) {
  std::vector<double> out(p);
  for (std::size_t i = 1; i <= p; ++i) out[i - 1] = spec.eigenvalue(i);
  return out;
}

Truncation truncate(const Spectrum& spec, std::size_t p, double tol) {
  if (p < 1) throw ConfigError("truncation size must be >= 1");
  Truncation t{Spectrum::from_values(materialize(spec, p)),
               spec.tail_sum(p, 1, tol)};
  return t;
}

RankSequenceResult spectrum_from_ranks(std::span<const double> u,
                                       std::size_t m) {
  if (m < 1) throw ConfigError("length m must be >= 1");
  if (u.size() < m) {
    throw ConfigError("rank sequence shorter than requested length");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(u[i] > 1.0)) throw InvalidRankSequence(i + 1);
  }

  RankSequenceResult out;
  out.values.resize(m);
  // Running product prod(1 - 1/u_i), kept directly while it stays in normal
  // range and in log space throughout (long benign sequences underflow the
  // direct product).
  double prod = 1.0;
  double log_prod = 0.0;
  bool direct_ok = true;
  for (std::size_t k = 0; k < m; ++k) {
    double inv = 1.0 / u[k];
    out.values[k] = direct_ok ? prod * inv : std::exp(log_prod) * inv;
    double factor = 1.0 - inv;
    prod *= factor;
    log_prod += std::log1p(-inv);
    if (prod < 1e-280) direct_ok = false;
  }
  out.tail_mass = direct_ok ? prod : std::exp(log_prod);
  out.log_tail_mass = log_prod;

  out.realized_r.resize(m);
  double suffix = out.tail_mass;
  for (std::size_t k = m; k > 0; --k) {
    // r_{k-1} = (sum_{i >= k} lambda_i + remainder) / lambda_k on the
    // emitted prefix; the tail sum includes lambda_k itself.
    suffix += out.values[k - 1];
    out.realized_r[k - 1] = suffix / out.values[k - 1];
  }

  out.monotone = std::is_sorted(out.values.begin(), out.values.end(),
                                std::greater<double>());
  return out;
}

Spectrum RankSequenceResult::spectrum() const {
  return Spectrum::from_values(values);
}

// ---------------------------------------------------------------------------
// FamilySpec

FamilySpec FamilySpec::poly_log(double alpha, double beta) {
  FamilySpec f;
  f.variant = Variant::PolyLog;
  f.alpha = alpha;
  f.beta = beta;
  return f;
}

FamilySpec FamilySpec::exponent(RateRule alpha_n) {
  FamilySpec f;
  f.variant = Variant::Exponent;
  f.alpha_n = alpha_n;
  return f;
}

FamilySpec FamilySpec::truncated_poly(double alpha, RateRule p_n) {
  FamilySpec f;
  f.variant = Variant::TruncatedPoly;
  f.alpha = alpha;
  f.p_n = p_n;
  return f;
}

FamilySpec FamilySpec::exp_plus_iso(double tau, RateRule eps_n, RateRule p_n) {
  FamilySpec f;
  f.variant = Variant::ExpPlusIso;
  f.tau = tau;
  f.eps_n = eps_n;
  f.p_n = p_n;
  return f;
}

FamilySpec FamilySpec::geometric(double q) {
  FamilySpec f;
  f.variant = Variant::Geometric;
  f.q = q;
  return f;
}

FamilySpec FamilySpec::constant(RateRule p_n) {
  FamilySpec f;
  f.variant = Variant::Constant;
  f.p_n = p_n;
  return f;
}

FamilySpec FamilySpec::constant(std::size_t p) {
  return constant(RateRule::constant(static_cast<double>(p)));
}

namespace {

std::size_t resolve_size(const RateRule& rule, std::size_t n,
                         const char* what) {
  double v = std::ceil(rule(static_cast<double>(n)));
  if (!(v >= 1.0)) throw InvalidFamily(std::string(what) + " resolves below 1");
  if (v > 9e15) {
    throw InvalidFamily(std::string(what) + " too large to materialize");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

Spectrum FamilySpec::instantiate(std::size_t n) const {
  switch (variant) {
    case Variant::PolyLog:
      return Spectrum::poly_log(alpha, beta);
    case Variant::Exponent: {
      double a = alpha_n(static_cast<double>(n));
      if (!(a > 0.0)) throw InvalidFamily("alpha_n resolves non-positive");
      return Spectrum::exponent(a);
    }
    case Variant::TruncatedPoly:
      return Spectrum::truncated_poly(alpha, resolve_size(p_n, n, "p_n"));
    case Variant::ExpPlusIso: {
      double eps = eps_n(static_cast<double>(n));
      if (!(eps > 0.0)) throw InvalidFamily("eps_n resolves non-positive");
      return Spectrum::exp_plus_iso(tau, eps, resolve_size(p_n, n, "p_n"));
    }
    case Variant::Geometric:
      return Spectrum::geometric(q);
    case Variant::Constant:
      return Spectrum::constant(resolve_size(p_n, n, "p_n"));
  }
  throw ConfigError("unknown family variant");
}

bool FamilySpec::depends_on_n() const {
  switch (variant) {
    case Variant::Exponent:
      return alpha_n.form != RateRule::Form::Const;
    case Variant::TruncatedPoly:
      return p_n.form != RateRule::Form::Const;
    case Variant::ExpPlusIso:
      return eps_n.form != RateRule::Form::Const ||
             p_n.form != RateRule::Form::Const;
    case Variant::Constant:
      return p_n.form != RateRule::Form::Const;
    default:
      return false;
  }
}

bool FamilySpec::finite_dimensional() const {
  switch (variant) {
    case Variant::TruncatedPoly:
    case Variant::ExpPlusIso:
    case Variant::Constant:
      return true;
    default:
      return false;
  }
}

std::string FamilySpec::variant_name() const {
  switch (variant) {
    case Variant::PolyLog:
      return "polylog";
    case Variant::Exponent:
      return "exponent";
    case Variant::TruncatedPoly:
      return "truncpoly";
    case Variant::ExpPlusIso:
      return "expiso";
    case Variant::Geometric:
      return "geometric";
    case Variant::Constant:
      return "constant";
  }
  return {};
}

std::string FamilySpec::str() const {
  switch (variant) {
    case Variant::PolyLog:
      return "polylog:alpha=" + format_double(alpha) +
             ",beta=" + format_double(beta);
    case Variant::Exponent:
      return "exponent:alpha=" + alpha_n.str();
    case Variant::TruncatedPoly:
      return "truncpoly:alpha=" + format_double(alpha) + ",p=" + p_n.str();
    case Variant::ExpPlusIso:
      return "expiso:tau=" + format_double(tau) + ",eps=" + eps_n.str() +
             ",p=" + p_n.str();
    case Variant::Geometric:
      return "geometric:q=" + format_double(q);
    case Variant::Constant:
      return "constant:p=" + p_n.str();
  }
  return {};
}

FamilySpec FamilySpec::parse(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("family spec must look like 'name:key=value,...'");
  }
  std::string name = strip(text.substr(0, colon));
  std::map<std::string, std::string> kv;
  std::string rest = text.substr(colon + 1);
  std::size_t pos = 0;
  while (pos < rest.size()) {
    // Parameter values may contain commas only inside exp(...) groups.
    std::size_t depth = 0;
    std::size_t end = pos;
    while (end < rest.size() && (rest[end] != ',' || depth > 0)) {
      if (rest[end] == '(') ++depth;
      if (rest[end] == ')') --depth;
      ++end;
    }
    std::string item = rest.substr(pos, end - pos);
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("family parameter missing '=': '" + item + "'");
    }
    kv[strip(item.substr(0, eq))] = strip(item.substr(eq + 1));
    pos = end + 1;
  }
  auto get = [&](std::initializer_list<const char*> keys) -> std::string {
    for (const char* k : keys) {
      auto it = kv.find(k);
      if (it != kv.end()) return it->second;
    }
    throw ConfigError("family '" + name + "' missing parameter '" +
                      std::string(*keys.begin()) + "'");
  };

  if (name == "constant") {
    return constant(RateRule::parse(get({"p"})));
  }
  if (name == "geometric") return geometric(parse_double(get({"q"})));
  if (name == "polylog") {
    return poly_log(parse_double(get({"alpha", "a"})),
                    parse_double(get({"beta", "b"})));
  }
  if (name == "exponent") {
    return exponent(RateRule::parse(get({"alpha", "a"})));
  }
  if (name == "truncpoly") {
    return truncated_poly(parse_double(get({"alpha", "a"})),
                          RateRule::parse(get({"p"})));
  }
  if (name == "expiso") {
    return exp_plus_iso(parse_double(get({"tau"})),
                        RateRule::parse(get({"eps", "epsilon"})),
                        RateRule::parse(get({"p"})));
  }
  throw ConfigError("unknown family '" + name + "'");
}

json FamilySpec::to_json() const {
  json j;
  j["variant"] = variant_name();
  json params = json::object();
  switch (variant) {
    case Variant::PolyLog:
      params["alpha"] = format_double(alpha);
      params["beta"] = format_double(beta);
      break;
    case Variant::Exponent:
      params["alpha"] = alpha_n.str();
      break;
    case Variant::TruncatedPoly:
      params["alpha"] = format_double(alpha);
      params["p"] = p_n.str();
      break;
    case Variant::ExpPlusIso:
      params["tau"] = format_double(tau);
      params["eps"] = eps_n.str();
      params["p"] = p_n.str();
      break;
    case Variant::Geometric:
      params["q"] = format_double(q);
      break;
    case Variant::Constant:
      params["p"] = p_n.str();
      break;
  }
  j["params"] = std::move(params);
  return j;
}

}  // namespace minterp
