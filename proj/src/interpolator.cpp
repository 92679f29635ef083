#include "minterp/interpolator.hpp"

#include <Eigen/Dense>

namespace minterp {

namespace {

void check_caps(const Eigen::MatrixXd& X) {
  if (X.rows() > static_cast<Eigen::Index>(kMaxSampleSize)) {
    throw SizeCapExceeded("n", static_cast<std::size_t>(X.rows()),
                          kMaxSampleSize);
  }
  if (X.cols() > static_cast<Eigen::Index>(kMaxDimension)) {
    throw SizeCapExceeded("p", static_cast<std::size_t>(X.cols()),
                          kMaxDimension);
  }
}

}  // namespace

GramInfo gram(const Eigen::MatrixXd& X) {
  check_caps(X);
  GramInfo info;
  Eigen::MatrixXd G = X * X.transpose();
  info.G = 0.5 * (G + G.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.G,
                                                     Eigen::EigenvaluesOnly);
  info.mu_min = eig.eigenvalues().minCoeff();
  info.mu_max = eig.eigenvalues().maxCoeff();
  return info;
}

FitResult min_norm_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       double rcond) {
  if (X.rows() != y.size()) {
    throw DimensionMismatch("response length does not match design rows");
  }
  if (!(rcond > 0.0)) throw ConfigError("rcond must be > 0");
  GramInfo info = gram(X);
  if (!(info.mu_min > rcond * info.mu_max) || !(info.mu_max > 0.0)) {
    throw GramSingular(info.mu_min, info.mu_max);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(info.G);
  if (llt.info() != Eigen::Success) {
    throw GramSingular(info.mu_min, info.mu_max);
  }
  Eigen::VectorXd a = llt.solve(y);
  a += llt.solve(y - info.G * a);  // one refinement pass

  FitResult fit;
  fit.theta_hat = X.transpose() * a;
  fit.gram_min_eig = info.mu_min;
  fit.gram_max_eig = info.mu_max;
  fit.interpolation_residual =
      (X * fit.theta_hat - y).cwiseAbs().maxCoeff();
  return fit;
}

FitResult min_norm_fit_degenerate(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& y, double rcond) {
  if (X.rows() != y.size()) {
    throw DimensionMismatch("response length does not match design rows");
  }
  check_caps(X);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  double cutoff = s.size() > 0 ? rcond * s[0] : 0.0;
  Eigen::VectorXd inv = s;
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    inv[i] = s[i] > cutoff ? 1.0 / s[i] : 0.0;
  }
  FitResult fit;
  fit.theta_hat =
      svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * y;
  fit.degenerate = true;
  fit.interpolation_residual =
      (X * fit.theta_hat - y).cwiseAbs().maxCoeff();
  Eigen::VectorXd sq = s.array().square();
  fit.gram_max_eig = sq.size() > 0 ? sq.maxCoeff() : 0.0;
  fit.gram_min_eig =
      X.rows() <= s.size() && sq.size() > 0 ? sq.minCoeff() : 0.0;
  return fit;
}

}  // namespace minterp
