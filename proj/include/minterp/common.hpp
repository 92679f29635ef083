#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace minterp {

inline constexpr const char* kVersion = "0.1.0";

// Desk-scale caps for dense linear algebra. Operations that would factor or
// eigensolve something larger refuse instead of thrashing.
inline constexpr std::size_t kMaxSampleSize = 1024;
inline constexpr std::size_t kMaxDimension = 8192;

// Default cap on the number of explicitly summed terms when bracketing an
// infinite eigenvalue tail. Slowly-decaying tails (the alpha = 1 polylog
// families) need several million terms before the bracket closes at deep k.
inline constexpr std::size_t kDefaultMaxTailTerms = 16'777'216;

enum class ErrorCode {
  Config = 2,     // bad parameters / malformed input
  Numerical = 3,  // singular Gram, unreachable bracket, undefined rank
  SizeCap = 4,    // desk-scale limit exceeded
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string kind, const std::string& message)
      : std::runtime_error(message), code_(code), kind_(std::move(kind)) {}
  ErrorCode code() const { return code_; }
  // Stable machine-readable tag, e.g. "gram_singular".
  const std::string& kind() const { return kind_; }

 private:
  ErrorCode code_;
  std::string kind_;
};

class NegativeEigenvalue : public Error {
 public:
  explicit NegativeEigenvalue(std::size_t index)
      : Error(ErrorCode::Config, "negative_eigenvalue",
              "negative eigenvalue at index " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const { return index_; }  // 1-based

 private:
  std::size_t index_;
};

class InvalidRankSequence : public Error {
 public:
  explicit InvalidRankSequence(std::size_t index)
      : Error(ErrorCode::Config, "invalid_rank_sequence",
              "rank sequence entry u_" + std::to_string(index) +
                  " must exceed 1"),
        index_(index) {}
  std::size_t index() const { return index_; }  // 1-based

 private:
  std::size_t index_;
};

class InvalidFamily : public Error {
 public:
  explicit InvalidFamily(const std::string& message)
      : Error(ErrorCode::Config, "invalid_family", message) {}
};

class BracketTooWide : public Error {
 public:
  BracketTooWide(double lower, double upper, std::size_t terms)
      : Error(ErrorCode::Numerical, "bracket_too_wide",
              "tail bracket did not reach the requested tolerance after " +
                  std::to_string(terms) + " terms"),
        lower_(lower), upper_(upper), terms_(terms) {}
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  std::size_t terms() const { return terms_; }

 private:
  double lower_, upper_;
  std::size_t terms_;
};

class RankUndefined : public Error {
 public:
  explicit RankUndefined(std::size_t k)
      : Error(ErrorCode::Numerical, "rank_undefined",
              "effective rank undefined at k=" + std::to_string(k) +
                  " (eigenvalue k+1 is zero)"),
        k_(k) {}
  std::size_t k() const { return k_; }

 private:
  std::size_t k_;
};

class FiniteRankRequired : public Error {
 public:
  FiniteRankRequired()
      : Error(ErrorCode::Config, "finite_rank_required",
              "operation requires a spectrum of finite rank") {}
};

class GramSingular : public Error {
 public:
  GramSingular(double mu_min, double mu_max)
      : Error(ErrorCode::Numerical, "gram_singular",
              "Gram matrix numerically singular (extreme eigenvalues " +
                  std::to_string(mu_min) + ", " + std::to_string(mu_max) + ")"),
        mu_min_(mu_min), mu_max_(mu_max) {}
  double mu_min() const { return mu_min_; }
  double mu_max() const { return mu_max_; }

 private:
  double mu_min_, mu_max_;
};

class NotApplicable : public Error {
 public:
  explicit NotApplicable(const std::string& message)
      : Error(ErrorCode::Numerical, "not_applicable", message) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& message)
      : Error(ErrorCode::Config, "dimension_mismatch", message) {}
};

class SizeCapExceeded : public Error {
 public:
  SizeCapExceeded(const std::string& what, std::size_t got, std::size_t cap)
      : Error(ErrorCode::SizeCap, "size_cap_exceeded",
              what + " = " + std::to_string(got) +
                  " exceeds the supported cap " + std::to_string(cap)) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorCode::Config, "config_error", message) {}
};

// Extended real used for effective ranks and bound terms. Infinity is a tag,
// never a floating-point value inside arithmetic; arithmetic that touches a
// non-finite operand yields Undefined, which renders as such in reports.
class ExtReal {
 public:
  enum class Kind { Finite, Infinite, Undefined };

  constexpr ExtReal() : kind_(Kind::Undefined), value_(0.0) {}
  static constexpr ExtReal finite(double v) { return ExtReal(Kind::Finite, v); }
  static constexpr ExtReal infinity() { return ExtReal(Kind::Infinite, 0.0); }
  static constexpr ExtReal undefined() { return ExtReal(Kind::Undefined, 0.0); }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_finite() const { return kind_ == Kind::Finite; }
  constexpr bool is_infinite() const { return kind_ == Kind::Infinite; }
  constexpr bool is_undefined() const { return kind_ == Kind::Undefined; }

  double value() const {
    if (!is_finite()) throw std::logic_error("ExtReal: value() on non-finite");
    return value_;
  }
  double value_or(double fallback) const {
    return is_finite() ? value_ : fallback;
  }

  friend ExtReal operator+(ExtReal a, ExtReal b) {
    if (a.is_finite() && b.is_finite()) return finite(a.value_ + b.value_);
    return undefined();
  }
  friend ExtReal operator*(ExtReal a, ExtReal b) {
    if (a.is_finite() && b.is_finite()) return finite(a.value_ * b.value_);
    return undefined();
  }
  friend ExtReal operator/(ExtReal a, ExtReal b) {
    if (a.is_finite() && b.is_finite()) return finite(a.value_ / b.value_);
    return undefined();
  }

 private:
  constexpr ExtReal(Kind kind, double value) : kind_(kind), value_(value) {}
  Kind kind_;
  double value_;
};

// Result of the k* threshold search: either a finite index or an
// infinity sentinel with the reason the scan came up empty.
struct KStar {
  std::optional<std::size_t> k;
  std::string reason;  // set when k is empty

  bool finite() const { return k.has_value(); }
  std::size_t index() const {
    if (!k) throw NotApplicable("k* is infinite: " + reason);
    return *k;
  }
};

}  // namespace minterp
