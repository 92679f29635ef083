// Acceptance suite: every criterion runs at its stated tolerance and prints
// one pass/fail line. Exit code = number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "minterp/interpolator.hpp"
#include "minterp/num_format.hpp"
#include "minterp/parallel.hpp"
#include "minterp/ranks.hpp"
#include "minterp/risk.hpp"
#include "minterp/sampling.hpp"
#include "minterp/spectrum.hpp"
#include "minterp/theory.hpp"

using namespace minterp;

namespace {

struct Checker {
  std::vector<std::string> failures;

  void require(bool cond, const std::string& what) {
    if (!cond) failures.push_back(what);
  }
};

struct Criterion {
  int id;
  std::string label;
  std::function<void(Checker&)> body;
};

// Shared acceptance grid: finite-dimensional instances with k* <= n/10 at
// b = 5 (constant, exponential-plus-isotropic, truncated polynomial).
struct GridInstance {
  Spectrum spectrum;
  std::size_t n;
  std::string tag;
};

std::vector<GridInstance> acceptance_grid() {
  std::vector<GridInstance> grid;
  for (std::size_t n : {64, 128, 256}) {
    grid.push_back({Spectrum::constant(8 * n), n,
                    "constant(p=8n) n=" + std::to_string(n)});
    grid.push_back({Spectrum::exp_plus_iso(1.0, 1e-2, 8 * n), n,
                    "expiso(eps=1e-2,p=8n) n=" + std::to_string(n)});
    grid.push_back({Spectrum::truncated_poly(0.3, 20 * n), n,
                    "truncpoly(alpha=0.3,p=20n) n=" + std::to_string(n)});
  }
  return grid;
}

// Instance pool for the two-path trace criterion: healthy tails across all
// three coordinate distributions.
struct TraceCase {
  RegressionInstance instance;
  std::string tag;
};

std::vector<TraceCase> trace_cases(std::size_t count) {
  std::vector<TraceCase> cases;
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const CoordinateDist dists[] = {CoordinateDist::Gaussian,
                                  CoordinateDist::Rademacher,
                                  CoordinateDist::ScaledUniform};
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t n = 16 + static_cast<std::size_t>(unif(rng) * 112);  // <=128
    std::size_t p_lo = 5 * n / 2;
    std::size_t p_hi = std::min<std::size_t>(1024, 8 * n);
    std::size_t p = p_lo + static_cast<std::size_t>(
                               unif(rng) * static_cast<double>(p_hi - p_lo));
    Spectrum spec = Spectrum::constant(1);
    switch (i % 3) {
      case 0:
        spec = Spectrum::constant(p);
        break;
      case 1:
        spec = Spectrum::exp_plus_iso(0.5 + 1.5 * unif(rng),
                                      0.01 + 0.09 * unif(rng), p);
        break;
      default:
        spec = Spectrum::truncated_poly(0.3 + 0.3 * unif(rng),
                                        std::max(p, 4 * n));
        break;
    }
    RegressionInstance inst;
    inst.spectrum = spec;
    inst.n = n;
    std::size_t dim = spec.finite_dimension().value();
    inst.theta_star = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    inst.z_dist = dists[i % 3];
    inst.seed = 1000 + i;
    cases.push_back({std::move(inst), "case " + std::to_string(i)});
  }
  return cases;
}

// Deterministic Monte Carlo workload rendered as a CSV body; used to compare
// runs across thread counts byte for byte.
std::string determinism_csv(int threads) {
  std::string body = "case,mc_mean,mc_stderr,trace_c,trace_c_alt\n";
  auto cases = trace_cases(5);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    RegressionInstance inst = cases[i].instance;
    inst.sigma = 1.0;
    inst.theta_star = make_theta_star(inst.dimension(), 1.0,
                                      ThetaMode::UniformDirection, inst.seed);
    RiskReport fixed = mc_risk(inst, 64, McMode::FixedDesign, threads);
    RiskReport full = mc_risk(inst, 32, McMode::FullResample, threads);
    body += csv_row({std::to_string(i), format_double(fixed.mc_mean),
                     format_double(fixed.mc_stderr),
                     format_double(fixed.trace_c.value()),
                     format_double(full.mc_mean)});
  }
  FamilySpec family = FamilySpec::parse("expiso:tau=1,eps=n^-1,p=n^1.5");
  std::vector<std::size_t> grid{32, 64, 128};
  ScanTable table = benign_scan(family, grid, 5, 4, 1, 1.0, 1.0,
                                CoordinateDist::Gaussian, 77, threads);
  body += table.to_csv();
  return body;
}

// --------------------------------------------------------------------------
// Criteria

void criterion_rank_identities(Checker& check) {
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t p = 2 + static_cast<std::size_t>(unif(rng) * 498);
    std::vector<double> values(p);
    for (auto& v : values) v = std::pow(unif(rng), 3.0);
    std::sort(values.begin(), values.end(), std::greater<double>());
    if (unif(rng) < 0.25) {
      std::size_t zeros = static_cast<std::size_t>(unif(rng) * (p / 4));
      for (std::size_t i = 0; i < zeros; ++i) values[p - 1 - i] = 0.0;
    }
    Spectrum spec = Spectrum::from_values(values);
    std::size_t rank = spec.finite_rank().value();
    for (std::size_t k = 0; k < rank; ++k) {
      RankIdentityReport rep = rank_identities_check(spec, k);
      if (!rep.pass(1e-8)) {
        check.require(false, "identities fail at trial " +
                                 std::to_string(trial) + " k=" +
                                 std::to_string(k) + " residual=" +
                                 format_double(rep.identity_residual));
        return;
      }
    }
  }
}

void criterion_closed_form_anchors(Checker& check) {
  for (std::size_t p : {1, 2, 17, 1000}) {
    Spectrum cons = Spectrum::constant(p);
    check.require(effective_rank_r(cons, 0).value() ==
                      static_cast<double>(p),
                  "constant r0 != p at p=" + std::to_string(p));
    check.require(effective_rank_R(cons, 0).value() ==
                      static_cast<double>(p),
                  "constant R0 != p at p=" + std::to_string(p));
  }
  Spectrum geo = Spectrum::geometric(0.5);
  for (std::size_t k = 0; k <= 50; ++k) {
    double r = effective_rank_r(geo, k).value();
    double R = effective_rank_R(geo, k).value();
    check.require(std::abs(r - 2.0) <= 1e-10 * 2.0,
                  "geometric r_k off at k=" + std::to_string(k));
    check.require(std::abs(R - 3.0) <= 1e-10 * 3.0,
                  "geometric R_k off at k=" + std::to_string(k));
  }
}

void criterion_spectrum_from_ranks(Checker& check) {
  std::mt19937 rng(103);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t m = 2 + static_cast<std::size_t>(unif(rng) * 198);
    std::vector<double> u(m);
    for (auto& v : u) v = 1.05 + 98.95 * unif(rng);  // inside (1, 100]
    RankSequenceResult res = spectrum_from_ranks(u, m);
    for (std::size_t k = 0; k + 1 < m; ++k) {
      double rel = std::abs(res.realized_r[k] - u[k]) / u[k];
      if (rel > 1e-8) {
        check.require(false, "realized rank off by " + format_double(rel) +
                                 " at trial " + std::to_string(trial));
        return;
      }
    }
  }
  std::vector<double> twos(53, 2.0);
  RankSequenceResult dyadic = spectrum_from_ranks(twos, 53);
  for (std::size_t k = 1; k <= 53; ++k) {
    check.require(dyadic.values[k - 1] == std::ldexp(1.0, -static_cast<int>(k)),
                  "u=2 prescription not exactly dyadic at k=" +
                      std::to_string(k));
  }
}

void criterion_two_path_trace(Checker& check) {
  auto cases = trace_cases(50);
  for (const auto& c : cases) {
    DesignMatrix design = sample_design(c.instance);
    double direct = variance_trace_direct(design.X, c.instance.spectrum);
    std::size_t dim = c.instance.dimension();
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < 10; ++i) {
      indices.push_back(1 + (i * dim) / 10);
    }
    TraceZResult z = variance_trace_z(design.X, c.instance.spectrum, indices);
    double rel = std::abs(direct - z.total) /
                 std::max({std::abs(direct), std::abs(z.total), 1e-300});
    check.require(rel <= 1e-8, c.tag + ": trace paths differ by " +
                                   format_double(rel));
    for (const auto& smw : z.checks) {
      check.require(!smw.skipped, c.tag + ": SMW check skipped");
      double smw_rel = std::abs(smw.lhs - smw.rhs) /
                       std::max({std::abs(smw.lhs), std::abs(smw.rhs),
                                 1e-300});
      check.require(smw_rel <= 1e-10,
                    c.tag + ": SMW identity off by " + format_double(smw_rel));
    }
    if (!check.failures.empty()) return;
  }
}

void criterion_exact_vs_mc(Checker& check) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RegressionInstance inst;
    inst.spectrum = Spectrum::exp_plus_iso(1.0, 1e-3, 1000);
    inst.n = 100;
    inst.sigma = 1.0;
    inst.seed = seed;
    inst.theta_star =
        make_theta_star(1000, 1.0, ThetaMode::UniformDirection, seed);
    RiskReport rep = mc_risk(inst, 2000, McMode::FixedDesign, 4);
    double gap = std::abs(rep.mc_mean - rep.expected_risk_given_X.value());
    if (gap <= 3.0 * rep.mc_stderr) ++hits;
  }
  check.require(hits >= 9, "exact-vs-MC agreement in only " +
                               std::to_string(hits) + "/10 seeds");
}

void criterion_optimal_l(Checker& check) {
  for (const auto& g : acceptance_grid()) {
    VarianceMinimizer vm = variance_term_minimizer(g.spectrum, g.n, 5.0);
    check.require(vm.l_min == vm.k_star,
                  g.tag + ": minimizer at l=" + std::to_string(vm.l_min) +
                      " != k*=" + std::to_string(vm.k_star));
    double rel = std::abs(vm.value - vm.reference) /
                 std::max(vm.reference, 1e-300);
    check.require(rel <= 1e-8,
                  g.tag + ": minimum off reference by " + format_double(rel));
  }
}

void criterion_phi_monotone(Checker& check) {
  Spectrum cons = Spectrum::constant(10000);
  for (std::size_t n : {10, 50}) {
    PhiReport rep = phi_monotone_check(cons, n, 5.0, 9998);
    check.require(rep.checked > 0, "phi check vacuous at n=" +
                                       std::to_string(n));
    check.require(rep.violations.empty(),
                  "phi violations at n=" + std::to_string(n) + ": " +
                      std::to_string(rep.violations.size()));
  }
}

void criterion_trace_sandwich(Checker& check) {
  std::size_t cells = 0, inside = 0;
  for (const auto& g : acceptance_grid()) {
    KStar ks = k_star(g.spectrum, g.n, 5.0, default_k_max(g.spectrum, g.n));
    check.require(ks.finite(), g.tag + ": k* not finite");
    if (!ks.finite()) return;
    check.require(*ks.k <= g.n / 10,
                  g.tag + ": k*=" + std::to_string(*ks.k) + " > n/10");
    double variance_term =
        static_cast<double>(*ks.k) / static_cast<double>(g.n) +
        static_cast<double>(g.n) / effective_rank_R(g.spectrum, *ks.k).value();
    std::vector<double> ratios(10, 0.0);
    parallel_for(10, 4, [&](std::size_t seed) {
      RegressionInstance inst;
      inst.spectrum = g.spectrum;
      inst.n = g.n;
      std::size_t dim = g.spectrum.finite_dimension().value();
      inst.theta_star = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
      inst.seed = 31 * seed + 7;
      DesignMatrix design = sample_design(inst);
      ratios[seed] =
          variance_trace_direct(design.X, inst.spectrum) / variance_term;
    });
    for (double ratio : ratios) {
      ++cells;
      if (ratio >= 1e-2 && ratio <= 1e2) ++inside;
    }
  }
  check.require(inside * 100 >= cells * 95,
                "trace/variance-term ratio inside [1e-2,1e2] in only " +
                    std::to_string(inside) + "/" + std::to_string(cells) +
                    " cells");
}

void criterion_not_benign_floor(Checker& check) {
  const std::size_t n = 100;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RegressionInstance inst;
    inst.spectrum = Spectrum::constant(2 * n);
    inst.n = n;
    inst.theta_star = Eigen::VectorXd::Zero(2 * n);
    inst.seed = seed;
    DesignMatrix design = sample_design(inst);
    double trace = variance_trace_direct(design.X, inst.spectrum);
    check.require(trace >= 0.05, "isotropic 2n floor broken at seed " +
                                     std::to_string(seed) + ": tr(C)=" +
                                     format_double(trace));
  }
}

void criterion_benign_trend(Checker& check) {
  std::vector<std::size_t> grid{64, 128, 256};
  std::vector<double> r0s, kstars, nRs, medians;
  for (std::size_t n : grid) {
    double nd = static_cast<double>(n);
    std::size_t p = static_cast<std::size_t>(std::ceil(std::pow(nd, 1.5)));
    double eps = std::sqrt(nd) / static_cast<double>(p);  // eps * p = sqrt(n)
    Spectrum spec = Spectrum::exp_plus_iso(1.0, eps, p);

    r0s.push_back(effective_rank_r(spec, 0).value() / nd);
    KStar ks = k_star(spec, n, 5.0, default_k_max(spec, n));
    check.require(ks.finite(), "k* infinite at n=" + std::to_string(n));
    if (!ks.finite()) return;
    kstars.push_back(static_cast<double>(*ks.k) / nd);
    nRs.push_back(nd / effective_rank_R(spec, *ks.k).value());

    std::vector<double> risks(20, 0.0);
    parallel_for(20, 4, [&](std::size_t seed) {
      RegressionInstance inst;
      inst.spectrum = spec;
      inst.n = n;
      inst.sigma = 1.0;
      inst.seed = child_seed(4242, Stream::Probe, 1000 * n + seed);
      inst.theta_star = make_theta_star(p, 1.0, ThetaMode::UniformDirection,
                                        inst.seed);
      DesignMatrix design = sample_design(inst);
      Eigen::VectorXd epsv = sample_noise(inst);
      Eigen::VectorXd y = design.X * inst.theta_star + epsv;
      FitResult fit = min_norm_fit(design.X, y);
      risks[seed] = excess_risk(fit.theta_hat, inst.theta_star, spec);
    });
    std::sort(risks.begin(), risks.end());
    medians.push_back(0.5 * (risks[9] + risks[10]));
  }
  auto check_decreasing = [&](const std::vector<double>& v,
                              const std::string& name) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      check.require(v[i + 1] < v[i],
                    name + " not strictly decreasing: " + format_double(v[i]) +
                        " -> " + format_double(v[i + 1]));
    }
  };
  check_decreasing(r0s, "r0/n");
  check_decreasing(kstars, "k*/n");
  check_decreasing(nRs, "n/R_k*");
  check_decreasing(medians, "median full-resample risk");
}

void criterion_classifier(Checker& check) {
  struct Case {
    const char* family;
    Verdict expected;
  };
  const Case cases[] = {
      {"polylog:alpha=1,beta=2", Verdict::Benign},
      {"polylog:alpha=1,beta=1", Verdict::NotBenign},
      {"polylog:alpha=2,beta=0", Verdict::NotBenign},
      {"exponent:alpha=n^-0.5", Verdict::Benign},
      {"exponent:alpha=0.5", Verdict::NotBenign},
      {"truncpoly:alpha=0.5,p=n^1.5", Verdict::Benign},
      {"truncpoly:alpha=2,p=n^1.5", Verdict::NotBenign},
      {"expiso:tau=1,eps=n^-1.5,p=n^2", Verdict::Benign},
  };
  for (const auto& c : cases) {
    BenignVerdict v = benign_classify(FamilySpec::parse(c.family));
    check.require(v.verdict == c.expected,
                  std::string(c.family) + ": got " + verdict_name(v.verdict));
    check.require(v.verdict != Verdict::OutOfCatalog || !v.rule.empty(),
                  std::string(c.family) + ": missing rule");
  }
}

void criterion_determinism(Checker& check) {
  std::string serial = determinism_csv(1);
  std::string threaded = determinism_csv(3);
  check.require(serial == threaded,
                "CSV bodies differ between --threads 1 and --threads 3");
  std::string again = determinism_csv(3);
  check.require(threaded == again, "CSV bodies differ between reruns");
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {1, "rank identity chain and product identity on random spectra",
       criterion_rank_identities},
      {2, "closed-form rank anchors (constant, geometric)",
       criterion_closed_form_anchors},
      {3, "spectrum-from-ranks round trip", criterion_spectrum_from_ranks},
      {4, "two-path trace equality with per-direction identity checks",
       criterion_two_path_trace},
      {5, "exact decomposition vs Monte Carlo (fixed design)",
       criterion_exact_vs_mc},
      {6, "brute-force variance minimizer lands on k*", criterion_optimal_l},
      {7, "phi monotonicity has no violations", criterion_phi_monotone},
      {8, "trace vs k*/n + n/R_k* sandwich on the grid",
       criterion_trace_sandwich},
      {9, "isotropic p=2n keeps tr(C) above the floor",
       criterion_not_benign_floor},
      {10, "benign family trends: analytic columns and MC medians fall",
       criterion_benign_trend},
      {11, "benign classifier conformance (8 catalog cases)",
       criterion_classifier},
      {12, "byte-identical outputs across thread counts",
       criterion_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    auto start = std::chrono::steady_clock::now();
    Checker check;
    try {
      criterion.body(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    if (check.failures.empty()) {
      std::printf("PASS  criterion %2d  %s  (%.1fs)\n", criterion.id,
                  criterion.label.c_str(), secs);
    } else {
      ++failures;
      std::printf("FAIL  criterion %2d  %s  (%.1fs)\n", criterion.id,
                  criterion.label.c_str(), secs);
      for (const auto& f : check.failures) {
        std::printf("      - %s\n", f.c_str());
      }
    }
    std::fflush(stdout);
  }
  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d acceptance criteria FAILED\n", failures);
  }
  return failures;
}
