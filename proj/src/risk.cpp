#include "minterp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "minterp/interpolator.hpp"
#include "minterp/parallel.hpp"

namespace minterp {

using nlohmann::json;

double excess_risk(const Eigen::VectorXd& theta,
                   const Eigen::VectorXd& theta_star, const Spectrum& spec) {
  if (theta.size() != theta_star.size()) {
    throw DimensionMismatch("theta and theta_star lengths differ");
  }
  double out = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    double d = theta[i] - theta_star[i];
    out += spec.eigenvalue(static_cast<std::size_t>(i) + 1) * d * d;
  }
  return out;
}

namespace {

struct GramSolver {
  GramInfo info;
  Eigen::LLT<Eigen::MatrixXd> llt;

  explicit GramSolver(const Eigen::MatrixXd& X, double rcond) {
    info = gram(X);
    if (!(info.mu_min > rcond * info.mu_max) || !(info.mu_max > 0.0)) {
      throw GramSingular(info.mu_min, info.mu_max);
    }
    llt.compute(info.G);
    if (llt.info() != Eigen::Success) {
      throw GramSingular(info.mu_min, info.mu_max);
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = llt.solve(rhs);
    x += llt.solve(rhs - info.G * x);
    return x;
  }

  Eigen::MatrixXd solve_matrix(const Eigen::MatrixXd& rhs) const {
    Eigen::MatrixXd x = llt.solve(rhs);
    x += llt.solve(rhs - info.G * x);
    return x;
  }
};

std::vector<double> lambdas_for(const Eigen::MatrixXd& X,
                                const Spectrum& spec) {
  return materialize(spec, static_cast<std::size_t>(X.cols()));
}

double bias_with_solver(const Eigen::MatrixXd& X,
                        const std::vector<double>& lam,
                        const Eigen::VectorXd& theta_star,
                        const GramSolver& solver) {
  if (X.cols() != theta_star.size()) {
    throw DimensionMismatch("theta_star length does not match design columns");
  }
  Eigen::VectorXd rhs = X * theta_star;
  Eigen::VectorXd a = solver.solve(rhs);
  Eigen::VectorXd w = theta_star - X.transpose() * a;  // (I - P) theta*
  double out = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out += lam[static_cast<std::size_t>(i)] * w[i] * w[i];
  }
  return out;
}

double trace_direct_with_solver(const Eigen::MatrixXd& X,
                                const std::vector<double>& lam,
                                const GramSolver& solver) {
  Eigen::MatrixXd scaled = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    scaled.col(j) *= lam[static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXd M = scaled * X.transpose();  // X Sigma X^T
  M = 0.5 * (M + M.transpose());
  // tr(G^-1 M G^-1) = tr(G^-2 M) via two n x n solves.
  Eigen::MatrixXd T = solver.solve_matrix(solver.solve_matrix(M));
  return T.trace();
}

TraceZResult trace_z_with_solver(const Eigen::MatrixXd& X,
                                 const std::vector<double>& lam,
                                 std::span<const std::size_t> smw_indices,
                                 const GramSolver& solver) {
  TraceZResult out;
  Eigen::MatrixXd W = solver.solve_matrix(X);  // A^-1 X, column i = sqrt(l_i) A^-1 z_i
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double l = lam[static_cast<std::size_t>(j)];
    if (l > 0.0) out.total += l * W.col(j).squaredNorm();
  }

  for (std::size_t idx : smw_indices) {
    SmwCheck check;
    check.index = idx;
    if (idx < 1 || idx > static_cast<std::size_t>(X.cols())) {
      throw ConfigError("SMW check index out of range");
    }
    double l = lam[idx - 1];
    if (!(l > 0.0)) {
      check.skipped = true;
      out.checks.push_back(check);
      continue;
    }
    Eigen::Index col = static_cast<Eigen::Index>(idx - 1);
    check.lhs = l * W.col(col).squaredNorm();

    // A_-i assembled from scratch with column i removed; the subtractive
    // update G - c c^T cancels badly for dominant directions.
    Eigen::MatrixXd Xm = X;
    Xm.col(col).setZero();
    Eigen::MatrixXd Am = Xm * Xm.transpose();
    Am = 0.5 * (Am + Am.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt_m(Am);
    if (llt_m.info() != Eigen::Success) {
      check.skipped = true;
      out.checks.push_back(check);
      continue;
    }
    Eigen::VectorXd z = X.col(col) / std::sqrt(l);
    Eigen::VectorXd q1 = llt_m.solve(z);
    q1 += llt_m.solve(z - Am * q1);
    double denom = 1.0 + l * z.dot(q1);
    check.rhs = l * l * q1.squaredNorm() / (denom * denom);
    out.checks.push_back(check);
  }
  return out;
}

}  // namespace

double bias_term(const Eigen::MatrixXd& X, const Spectrum& spec,
                 const Eigen::VectorXd& theta_star, double rcond) {
  GramSolver solver(X, rcond);
  return bias_with_solver(X, lambdas_for(X, spec), theta_star, solver);
}

double variance_trace_direct(const Eigen::MatrixXd& X, const Spectrum& spec,
                             double rcond) {
  GramSolver solver(X, rcond);
  return trace_direct_with_solver(X, lambdas_for(X, spec), solver);
}

TraceZResult variance_trace_z(const Eigen::MatrixXd& X, const Spectrum& spec,
                              std::span<const std::size_t> smw_indices,
                              double rcond) {
  GramSolver solver(X, rcond);
  return trace_z_with_solver(X, lambdas_for(X, spec), smw_indices, solver);
}

std::string mode_name(McMode m) {
  return m == McMode::FixedDesign ? "fixed-design" : "full-resample";
}

McMode parse_mode(const std::string& name) {
  if (name == "fixed-design") return McMode::FixedDesign;
  if (name == "full-resample") return McMode::FullResample;
  throw ConfigError("unknown MC mode '" + name + "'");
}

RiskReport mc_risk(const RegressionInstance& inst, std::size_t replicas,
                   McMode mode, int threads) {
  inst.validate();
  if (replicas < 2) throw ConfigError("mc_risk requires replicas >= 2");

  RiskReport report;
  report.replicas = replicas;
  report.mode = mode;
  report.seed = inst.seed;
  report.sigma = inst.sigma;

  std::vector<double> risks(replicas,
                            std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(replicas, 0);

  if (mode == McMode::FixedDesign) {
    DesignMatrix design = sample_design(inst, 0);
    GramSolver solver(design.X, inst.rcond);  // singular shared design aborts
    std::vector<double> lam = lambdas_for(design.X, inst.spectrum);
    double bias = bias_with_solver(design.X, lam, inst.theta_star, solver);
    double trace = trace_direct_with_solver(design.X, lam, solver);
    TraceZResult alt = trace_z_with_solver(design.X, lam, {}, solver);
    report.bias_term = bias;
    report.trace_c = trace;
    report.trace_c_alt = alt.total;
    report.expected_risk_given_X = bias + inst.sigma * inst.sigma * trace;

    parallel_for(replicas, threads, [&](std::size_t r) {
      Eigen::VectorXd eps = sample_noise(inst, r);
      Eigen::VectorXd y = design.X * inst.theta_star + eps;
      Eigen::VectorXd theta_hat = design.X.transpose() * solver.solve(y);
      risks[r] = excess_risk(theta_hat, inst.theta_star, inst.spectrum);
      ok[r] = 1;
    });
  } else {
    parallel_for(replicas, threads, [&](std::size_t r) {
      DesignMatrix design = sample_design(inst, r);
      Eigen::VectorXd eps = sample_noise(inst, r);
      Eigen::VectorXd y = design.X * inst.theta_star + eps;
      try {
        FitResult fit = min_norm_fit(design.X, y, inst.rcond);
        risks[r] = excess_risk(fit.theta_hat, inst.theta_star, inst.spectrum);
        ok[r] = 1;
      } catch (const GramSingular&) {
        ok[r] = 0;
      }
    });
  }

  std::vector<double> kept;
  kept.reserve(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    if (ok[r]) kept.push_back(risks[r]);
  }
  report.failed = replicas - kept.size();
  if (report.failed * 10 > replicas) {
    throw NotApplicable("more than 10% of replicas had a singular Gram (" +
                        std::to_string(report.failed) + "/" +
                        std::to_string(replicas) + ")");
  }

  const std::size_t m = kept.size();
  double mean = pairwise_sum(kept) / static_cast<double>(m);
  std::vector<double> dev_sq(m);
  for (std::size_t i = 0; i < m; ++i) {
    double d = kept[i] - mean;
    dev_sq[i] = d * d;
  }
  double var = pairwise_sum(dev_sq) / static_cast<double>(m - 1);
  report.mc_mean = mean;
  report.mc_stderr = std::sqrt(var / static_cast<double>(m));
  return report;
}

json RiskReport::to_json() const {
  json j;
  auto put = [&j](const char* key, const std::optional<double>& v) {
    if (v) {
      j[key] = *v;
    } else {
      j[key] = nullptr;
    }
  };
  put("bias_term", bias_term);
  put("trace_c", trace_c);
  put("trace_c_alt", trace_c_alt);
  put("expected_risk_given_X", expected_risk_given_X);
  j["mc_mean"] = mc_mean;
  j["mc_stderr"] = mc_stderr;
  j["replicas"] = replicas;
  j["failed"] = failed;
  j["mode"] = mode_name(mode);
  j["seed"] = seed;
  j["sigma"] = sigma;
  return j;
}

ConcentrationProbe eigen_concentration_probe(const Spectrum& spec,
                                             std::size_t n, std::size_t k,
                                             std::size_t seeds,
                                             CoordinateDist dist,
                                             std::uint64_t base_seed,
                                             int threads) {
  auto dim = spec.finite_dimension();
  if (!dim) throw ConfigError("concentration probe needs a finite spectrum");
  if (k >= *dim) throw ConfigError("probe requires k < p");
  if (n < 1 || seeds < 1) throw ConfigError("probe requires n, seeds >= 1");
  if (n > kMaxSampleSize) throw SizeCapExceeded("n", n, kMaxSampleSize);
  if (*dim > kMaxDimension) throw SizeCapExceeded("p", *dim, kMaxDimension);

  const std::size_t tail_count = *dim - k;
  std::vector<double> lam(tail_count);
  for (std::size_t j = 0; j < tail_count; ++j) {
    lam[j] = spec.eigenvalue(k + 1 + j);
  }
  double tail = spec.tail_sum(k, 1).value;
  double scale = tail + spec.eigenvalue(k + 1) * static_cast<double>(n);

  ConcentrationProbe probe;
  probe.n = n;
  probe.k = k;
  probe.scale = scale;
  probe.rows.resize(seeds);

  parallel_for(seeds, threads, [&](std::size_t s) {
    UnitRng rng(child_seed(base_seed, Stream::Probe, s));
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(tail_count));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < tail_count; ++j) {
        Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            std::sqrt(lam[j]) * rng.draw(dist);
      }
    }
    Eigen::MatrixXd A = Y * Y.transpose();
    A = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A,
                                                       Eigen::EigenvaluesOnly);
    ProbeRow row;
    row.seed_index = s;
    row.mu_1 = eig.eigenvalues().maxCoeff();
    row.mu_n = eig.eigenvalues().minCoeff();
    row.ratio_hi = row.mu_1 / scale;
    row.ratio_lo = row.mu_n / scale;
    probe.rows[s] = row;
  });

  auto summarize = [](std::vector<double> values, double& mn, double& md,
                      double& mx) {
    std::sort(values.begin(), values.end());
    mn = values.front();
    mx = values.back();
    std::size_t m = values.size();
    md = m % 2 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
  };
  std::vector<double> lo(seeds), hi(seeds);
  for (std::size_t s = 0; s < seeds; ++s) {
    lo[s] = probe.rows[s].ratio_lo;
    hi[s] = probe.rows[s].ratio_hi;
  }
  summarize(lo, probe.lo_min, probe.lo_median, probe.lo_max);
  summarize(hi, probe.hi_min, probe.hi_median, probe.hi_max);
  return probe;
}

json ConcentrationProbe::to_json() const {
  json j;
  j["n"] = n;
  j["k"] = k;
  j["scale"] = scale;
  json rows_json = json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"seed_index", row.seed_index},
                         {"mu_1", row.mu_1},
                         {"mu_n", row.mu_n},
                         {"ratio_hi", row.ratio_hi},
                         {"ratio_lo", row.ratio_lo}});
  }
  j["rows"] = std::move(rows_json);
  j["ratio_lo"] = {{"min", lo_min}, {"median", lo_median}, {"max", lo_max}};
  j["ratio_hi"] = {{"min", hi_min}, {"median", hi_median}, {"max", hi_max}};
  return j;
}

}  // namespace minterp
