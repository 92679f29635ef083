#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Core>

#include "minterp/common.hpp"
#include "minterp/spectrum.hpp"

namespace minterp {

enum class CoordinateDist {
  Gaussian,
  Rademacher,     // +-1
  ScaledUniform,  // uniform on [-sqrt(3), sqrt(3)]
};

std::string dist_name(CoordinateDist d);
CoordinateDist parse_dist(const std::string& name);

// Independent substreams are derived from (seed, stream tag, index) by a
// SplitMix64-style mix, so the design, noise and direction draws never share
// state and parallel replicas are order-independent.
enum class Stream : std::uint64_t {
  Design = 1,
  Noise = 2,
  Direction = 3,
  Probe = 4,
};

std::uint64_t child_seed(std::uint64_t seed, Stream stream,
                         std::uint64_t index = 0);

// Deterministic unit-variance draws on top of std::mt19937_64 (whose output
// sequence the standard pins down exactly). Gaussian uses Box-Muller.
class UnitRng {
 public:
  explicit UnitRng(std::uint64_t seed) : engine_(seed) {}

  double uniform01();               // [0, 1)
  double draw(CoordinateDist d);    // mean 0, variance 1
  double gaussian();

 private:
  std::mt19937_64 engine_;
};

struct RegressionInstance {
  Spectrum spectrum;  // finite, p eigenvalues
  std::size_t n = 0;
  Eigen::VectorXd theta_star;
  double sigma = 1.0;
  CoordinateDist z_dist = CoordinateDist::Gaussian;
  CoordinateDist noise_dist = CoordinateDist::Gaussian;
  std::uint64_t seed = 0;
  double rcond = 1e-10;

  std::size_t dimension() const;  // p, from the spectrum
  void validate() const;
  std::string hash() const;  // provenance digest over the defining fields
};

struct DesignMatrix {
  Eigen::MatrixXd X;  // n x p
  std::uint64_t seed = 0;
  std::string instance_hash;
};

// Rows x_i = (sqrt(lambda_1) z_i1, ..., sqrt(lambda_p) z_ip) with z entries
// i.i.d. from z_dist. Deterministic in (seed, n, p, z_dist); independent of
// sigma. replica selects an independent design substream.
DesignMatrix sample_design(const RegressionInstance& inst,
                           std::uint64_t replica = 0);

// i.i.d. mean-zero variance-sigma^2 noise from a stream independent of the
// design stream, so fixed-X-resample-eps experiments are exact.
Eigen::VectorXd sample_noise(const RegressionInstance& inst,
                             std::uint64_t replica = 0);

Eigen::VectorXd make_response(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& theta_star,
                              const Eigen::VectorXd& eps);

enum class ThetaMode { FirstCoordinate, UniformDirection, Explicit };

// Coefficient vector with Euclidean norm exactly t. Explicit input is
// rescaled to norm t and must have length p.
Eigen::VectorXd make_theta_star(std::size_t p, double t, ThetaMode mode,
                                std::uint64_t seed = 0,
                                const Eigen::VectorXd* explicit_vec = nullptr);

// Row-major CSV at full decimal precision.
std::string design_to_csv(const Eigen::MatrixXd& X);

}  // namespace minterp
