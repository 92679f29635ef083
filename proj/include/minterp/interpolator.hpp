#pragma once

#include <Eigen/Core>

#include "minterp/common.hpp"

namespace minterp {

struct GramInfo {
  Eigen::MatrixXd G;  // n x n, symmetrized
  double mu_min = 0.0;
  double mu_max = 0.0;
};

// G = X X^T with the roundoff asymmetry averaged out, plus its extreme
// eigenvalues.
GramInfo gram(const Eigen::MatrixXd& X);

struct FitResult {
  Eigen::VectorXd theta_hat;
  double gram_min_eig = 0.0;
  double gram_max_eig = 0.0;
  double interpolation_residual = 0.0;  // max_i |(X theta_hat - y)_i|
  bool degenerate = false;  // pseudoinverse fallback was used
};

// Minimum-norm interpolant theta = X^T (X X^T)^-1 y via an SPD solve of the
// n x n Gram system (one refinement pass). Throws GramSingular when
// mu_n(G) < rcond * mu_1(G).
FitResult min_norm_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       double rcond = 1e-10);

// General least-squares fallback for singular Gram matrices, computed through
// a full SVD of X and flagged degenerate. Excluded from acceptance paths.
FitResult min_norm_fit_degenerate(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& y,
                                  double rcond = 1e-10);

}  // namespace minterp
