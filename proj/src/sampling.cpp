#include "minterp/sampling.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "minterp/num_format.hpp"

namespace minterp {

std::string dist_name(CoordinateDist d) {
  switch (d) {
    case CoordinateDist::Gaussian:
      return "gaussian";
    case CoordinateDist::Rademacher:
      return "rademacher";
    case CoordinateDist::ScaledUniform:
      return "uniform";
  }
  return {};
}

CoordinateDist parse_dist(const std::string& name) {
  if (name == "gaussian") return CoordinateDist::Gaussian;
  if (name == "rademacher") return CoordinateDist::Rademacher;
  if (name == "uniform") return CoordinateDist::ScaledUniform;
  throw ConfigError("unknown coordinate distribution '" + name + "'");
}

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

}  // namespace

std::uint64_t child_seed(std::uint64_t seed, Stream stream,
                         std::uint64_t index) {
  std::uint64_t h = mix64(seed + kGolden * static_cast<std::uint64_t>(stream));
  return mix64(h + kGolden * (index + 1));
}

double UnitRng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double UnitRng::gaussian() {
  // Box-Muller, cosine branch only; the spare is discarded for a stateless
  // per-draw mapping from the engine stream.
  double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double UnitRng::draw(CoordinateDist d) {
  switch (d) {
    case CoordinateDist::Gaussian:
      return gaussian();
    case CoordinateDist::Rademacher:
      return (engine_() >> 63) ? 1.0 : -1.0;
    case CoordinateDist::ScaledUniform:
      return (2.0 * uniform01() - 1.0) * std::numbers::sqrt3;
  }
  return 0.0;
}

std::size_t RegressionInstance::dimension() const {
  auto dim = spectrum.finite_dimension();
  if (!dim) {
    throw ConfigError(
        "regression instances need a finite spectrum; truncate first");
  }
  return *dim;
}

void RegressionInstance::validate() const {
  // Sampling itself has no desk-scale cap; the dense linear algebra entry
  // points (gram, fits, traces) refuse oversized problems.
  std::size_t p = dimension();
  if (n < 1) throw ConfigError("instance requires n >= 1");
  if (p < 1) throw ConfigError("instance requires p >= 1");
  if (theta_star.size() != static_cast<Eigen::Index>(p)) {
    throw DimensionMismatch("theta_star has length " +
                            std::to_string(theta_star.size()) +
                            ", expected p = " + std::to_string(p));
  }
  if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
  if (!(rcond > 0.0)) throw ConfigError("rcond must be > 0");
}

std::string RegressionInstance::hash() const {
  // FNV-1a over the defining fields; provenance only, not cryptographic.
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  feed(spectrum.to_json().dump());
  feed("|n=" + std::to_string(n));
  feed("|sigma=" + format_double(sigma));
  feed("|z=" + dist_name(z_dist));
  feed("|noise=" + dist_name(noise_dist));
  feed("|seed=" + std::to_string(seed));
  for (Eigen::Index i = 0; i < theta_star.size(); ++i) {
    feed("," + format_double(theta_star[i]));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

DesignMatrix sample_design(const RegressionInstance& inst,
                           std::uint64_t replica) {
  inst.validate();
  const std::size_t p = inst.dimension();
  std::vector<double> scale = materialize(inst.spectrum, p);
  for (double& s : scale) s = std::sqrt(s);

  UnitRng rng(child_seed(inst.seed, Stream::Design, replica));
  DesignMatrix out;
  out.X.resize(static_cast<Eigen::Index>(inst.n),
               static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < inst.n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          scale[j] * rng.draw(inst.z_dist);
    }
  }
  out.seed = inst.seed;
  out.instance_hash = inst.hash();
  return out;
}

Eigen::VectorXd sample_noise(const RegressionInstance& inst,
                             std::uint64_t replica) {
  Eigen::VectorXd eps(static_cast<Eigen::Index>(inst.n));
  if (inst.sigma == 0.0) {
    eps.setZero();
    return eps;
  }
  UnitRng rng(child_seed(inst.seed, Stream::Noise, replica));
  for (Eigen::Index i = 0; i < eps.size(); ++i) {
    eps[i] = inst.sigma * rng.draw(inst.noise_dist);
  }
  return eps;
}

Eigen::VectorXd make_response(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& theta_star,
                              const Eigen::VectorXd& eps) {
  if (X.cols() != theta_star.size()) {
    throw DimensionMismatch("theta_star length does not match design columns");
  }
  if (X.rows() != eps.size()) {
    throw DimensionMismatch("noise length does not match design rows");
  }
  return X * theta_star + eps;
}

Eigen::VectorXd make_theta_star(std::size_t p, double t, ThetaMode mode,
                                std::uint64_t seed,
                                const Eigen::VectorXd* explicit_vec) {
  if (t < 0.0) throw ConfigError("theta norm must be >= 0");
  Eigen::VectorXd theta =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  if (t == 0.0) return theta;
  switch (mode) {
    case ThetaMode::FirstCoordinate:
      theta[0] = t;
      return theta;
    case ThetaMode::UniformDirection: {
      UnitRng rng(child_seed(seed, Stream::Direction));
      double norm_sq = 0.0;
      do {
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
          theta[i] = rng.gaussian();
        }
        norm_sq = theta.squaredNorm();
      } while (norm_sq == 0.0);
      theta *= t / std::sqrt(norm_sq);
      return theta;
    }
    case ThetaMode::Explicit: {
      if (!explicit_vec) throw ConfigError("explicit theta vector missing");
      if (explicit_vec->size() != static_cast<Eigen::Index>(p)) {
        throw DimensionMismatch("explicit theta has length " +
                                std::to_string(explicit_vec->size()) +
                                ", expected " + std::to_string(p));
      }
      double norm = explicit_vec->norm();
      if (norm == 0.0) {
        throw ConfigError("explicit theta is zero but nonzero norm requested");
      }
      return (*explicit_vec) * (t / norm);
    }
  }
  return theta;
}

std::string design_to_csv(const Eigen::MatrixXd& X) {
  std::string out;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      row.push_back(format_double(X(i, j)));
    }
    out += csv_row(row);
  }
  return out;
}

}  // namespace minterp
