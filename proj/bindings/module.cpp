#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "minterp/common.hpp"
#include "minterp/interpolator.hpp"
#include "minterp/num_format.hpp"
#include "minterp/ranks.hpp"
#include "minterp/risk.hpp"
#include "minterp/sampling.hpp"
#include "minterp/spectrum.hpp"
#include "minterp/theory.hpp"

namespace py = pybind11;
using namespace minterp;
using nlohmann::json;

namespace {

py::object json_to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(json_to_py(item));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it) {
        out[py::str(it.key())] = json_to_py(it.value());
      }
      return out;
    }
    default:
      return py::none();
  }
}

py::object ext_to_py(const ExtReal& v) {
  if (v.is_finite()) return py::float_(v.value());
  if (v.is_infinite()) {
    return py::float_(std::numeric_limits<double>::infinity());
  }
  return py::none();
}

py::object kstar_to_py(const KStar& k) {
  if (k.finite()) return py::int_(*k.k);
  return py::none();
}

CoordinateDist dist_from_py(const std::string& name) {
  return parse_dist(name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "minimum-norm interpolating regression laboratory: spectra, effective "
      "ranks, risk decomposition, benign classification";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "MinterpError");

  // ---- spectrum -----------------------------------------------------------
  py::class_<TailSum>(m, "TailSum")
      .def_readonly("value", &TailSum::value)
      .def_readonly("lower", &TailSum::lower)
      .def_readonly("upper", &TailSum::upper)
      .def_readonly("exact", &TailSum::exact)
      .def_readonly("divergent", &TailSum::divergent)
      .def("__repr__", [](const TailSum& t) {
        if (t.divergent) return std::string("TailSum(divergent)");
        return "TailSum(" + format_double(t.value) + ")";
      });

  py::class_<Spectrum>(m, "Spectrum")
      .def_static("from_values", &Spectrum::from_values, py::arg("values"))
      .def_static("poly_log", &Spectrum::poly_log, py::arg("alpha"),
                  py::arg("beta"))
      .def_static("exponent", &Spectrum::exponent, py::arg("alpha"))
      .def_static("truncated_poly", &Spectrum::truncated_poly,
                  py::arg("alpha"), py::arg("p"))
      .def_static("exp_plus_iso", &Spectrum::exp_plus_iso, py::arg("tau"),
                  py::arg("eps"), py::arg("p"))
      .def_static("geometric", &Spectrum::geometric, py::arg("q"))
      .def_static("constant", &Spectrum::constant, py::arg("p"))
      .def("eigenvalue", &Spectrum::eigenvalue, py::arg("i"))
      .def("tail_sum", &Spectrum::tail_sum, py::arg("k"), py::arg("power"),
           py::arg("tol") = 1e-8, py::arg("max_terms") = kDefaultMaxTailTerms)
      .def_property_readonly("finite_dimension",
                             [](const Spectrum& s) -> py::object {
                               auto d = s.finite_dimension();
                               if (d) return py::int_(*d);
                               return py::none();
                             })
      .def_property_readonly("finite_rank",
                             [](const Spectrum& s) -> py::object {
                               auto d = s.finite_rank();
                               if (d) return py::int_(*d);
                               return py::none();
                             })
      .def_property_readonly("reordered", &Spectrum::reordered)
      .def_property_readonly("operator_norm", &Spectrum::operator_norm)
      .def_property_readonly("variant", &Spectrum::variant_name)
      .def("to_json", [](const Spectrum& s) { return json_to_py(s.to_json()); })
      .def("to_json_str", [](const Spectrum& s) { return s.to_json().dump(); })
      .def_static("from_json_str", [](const std::string& text) {
        return Spectrum::from_json(json::parse(text));
      });

  m.def("materialize", &materialize, py::arg("spectrum"), py::arg("p"));

  py::class_<Truncation>(m, "Truncation")
      .def_readonly("spectrum", &Truncation::spectrum)
      .def_readonly("discarded", &Truncation::discarded);
  m.def(
      "truncate",
      [](const Spectrum& spec, std::size_t p, double tol) {
        return minterp::truncate(spec, p, tol);
      },
      py::arg("spectrum"), py::arg("p"), py::arg("tol") = 1e-8);

  py::class_<RankSequenceResult>(m, "RankSequenceResult")
      .def_readonly("values", &RankSequenceResult::values)
      .def_readonly("tail_mass", &RankSequenceResult::tail_mass)
      .def_readonly("log_tail_mass", &RankSequenceResult::log_tail_mass)
      .def_readonly("realized_r", &RankSequenceResult::realized_r)
      .def_readonly("monotone", &RankSequenceResult::monotone)
      .def("spectrum", &RankSequenceResult::spectrum);
  m.def(
      "spectrum_from_ranks",
      [](const std::vector<double>& u, std::optional<std::size_t> m) {
        return spectrum_from_ranks(u, m.value_or(u.size()));
      },
      py::arg("u"), py::arg("m") = py::none());

  py::class_<FamilySpec>(m, "FamilySpec")
      .def_static("parse", &FamilySpec::parse, py::arg("text"))
      .def("instantiate", &FamilySpec::instantiate, py::arg("n"))
      .def_property_readonly("finite_dimensional",
                             &FamilySpec::finite_dimensional)
      .def_property_readonly("variant", &FamilySpec::variant_name)
      .def("__str__", &FamilySpec::str);

  // ---- ranks --------------------------------------------------------------
  m.def(
      "effective_rank_r",
      [](const Spectrum& s, std::size_t k, double tol) {
        return ext_to_py(effective_rank_r(s, k, tol));
      },
      py::arg("spectrum"), py::arg("k"), py::arg("tol") = 1e-8);
  m.def(
      "effective_rank_R",
      [](const Spectrum& s, std::size_t k, double tol) {
        return ext_to_py(effective_rank_R(s, k, tol));
      },
      py::arg("spectrum"), py::arg("k"), py::arg("tol") = 1e-8);
  m.def(
      "k_star",
      [](const Spectrum& s, std::size_t n, double b,
         std::optional<std::size_t> k_max, double tol) {
        return kstar_to_py(
            k_star(s, n, b, k_max.value_or(default_k_max(s, n)), tol));
      },
      py::arg("spectrum"), py::arg("n"), py::arg("b") = 5.0,
      py::arg("k_max") = py::none(), py::arg("tol") = 1e-8);

  py::class_<SymmetryFactors>(m, "SymmetryFactors")
      .def_readonly("rank", &SymmetryFactors::rank)
      .def_readonly("s", &SymmetryFactors::s)
      .def_readonly("S", &SymmetryFactors::S);
  m.def("symmetry_factors", &symmetry_factors, py::arg("spectrum"));

  py::class_<RankIdentityReport>(m, "RankIdentityReport")
      .def_readonly("applicable", &RankIdentityReport::applicable)
      .def_readonly("k", &RankIdentityReport::k)
      .def_readonly("r", &RankIdentityReport::r)
      .def_readonly("R", &RankIdentityReport::R)
      .def_readonly("r_sq", &RankIdentityReport::r_sq)
      .def_readonly("identity_residual",
                    &RankIdentityReport::identity_residual)
      .def("passes", &RankIdentityReport::pass, py::arg("tol") = 1e-8);
  m.def("rank_identities_check", &rank_identities_check, py::arg("spectrum"),
        py::arg("k"), py::arg("tol") = 1e-8);

  m.def("phi", &phi, py::arg("spectrum"), py::arg("k"), py::arg("n"),
        py::arg("b"), py::arg("tol") = 1e-8);
  py::class_<PhiReport>(m, "PhiReport")
      .def_readonly("checked", &PhiReport::checked)
      .def_property_readonly("violations", [](const PhiReport& r) {
        py::list out;
        for (const auto& v : r.violations) {
          out.append(py::make_tuple(v.k, v.phi_k, v.phi_next, v.r_k));
        }
        return out;
      });
  m.def("phi_monotone_check", &phi_monotone_check, py::arg("spectrum"),
        py::arg("n"), py::arg("b"), py::arg("k_max"), py::arg("tol") = 1e-8);

  py::class_<VarianceMinimizer>(m, "VarianceMinimizer")
      .def_readonly("l_min", &VarianceMinimizer::l_min)
      .def_readonly("value", &VarianceMinimizer::value)
      .def_readonly("k_star", &VarianceMinimizer::k_star)
      .def_readonly("reference", &VarianceMinimizer::reference)
      .def_readonly("matches_reference",
                    &VarianceMinimizer::matches_reference);
  m.def("variance_term_minimizer", &variance_term_minimizer,
        py::arg("spectrum"), py::arg("n"), py::arg("b") = 5.0,
        py::arg("tol") = 1e-8);

  py::class_<RankProfile>(m, "RankProfile")
      .def_readonly("n", &RankProfile::n)
      .def_readonly("b", &RankProfile::b)
      .def_readonly("k_max", &RankProfile::k_max)
      .def_property_readonly("r",
                             [](const RankProfile& p) {
                               py::list out;
                               for (const auto& v : p.r)
                                 out.append(ext_to_py(v));
                               return out;
                             })
      .def_property_readonly("R",
                             [](const RankProfile& p) {
                               py::list out;
                               for (const auto& v : p.R)
                                 out.append(ext_to_py(v));
                               return out;
                             })
      .def_property_readonly(
          "k_star",
          [](const RankProfile& p) { return kstar_to_py(p.k_star); })
      .def_property_readonly("k_star_reason",
                             [](const RankProfile& p) {
                               return p.k_star.reason;
                             })
      .def_property_readonly(
          "variance_term",
          [](const RankProfile& p) { return ext_to_py(p.variance_term); })
      .def("to_csv", &RankProfile::to_csv)
      .def("header", [](const RankProfile& p) {
        return json_to_py(p.header_json());
      });
  m.def(
      "rank_profile",
      [](const Spectrum& s, std::size_t n, double b,
         std::optional<std::size_t> k_max, double tol) {
        return rank_profile(s, n, b, k_max, tol);
      },
      py::arg("spectrum"), py::arg("n"), py::arg("b") = 5.0,
      py::arg("k_max") = py::none(), py::arg("tol") = 1e-8);

  // ---- sampling -----------------------------------------------------------
  py::class_<RegressionInstance>(m, "RegressionInstance")
      .def(py::init([](const Spectrum& spectrum, std::size_t n,
                       const Eigen::VectorXd& theta_star, double sigma,
                       const std::string& z_dist,
                       const std::string& noise_dist, std::uint64_t seed,
                       double rcond) {
             RegressionInstance inst;
             inst.spectrum = spectrum;
             inst.n = n;
             inst.theta_star = theta_star;
             inst.sigma = sigma;
             inst.z_dist = dist_from_py(z_dist);
             inst.noise_dist = dist_from_py(noise_dist);
             inst.seed = seed;
             inst.rcond = rcond;
             inst.validate();
             return inst;
           }),
           py::arg("spectrum"), py::arg("n"), py::arg("theta_star"),
           py::arg("sigma") = 1.0, py::arg("z_dist") = "gaussian",
           py::arg("noise_dist") = "gaussian", py::arg("seed") = 0,
           py::arg("rcond") = 1e-10)
      .def_readonly("spectrum", &RegressionInstance::spectrum)
      .def_readonly("n", &RegressionInstance::n)
      .def_readonly("theta_star", &RegressionInstance::theta_star)
      .def_readonly("sigma", &RegressionInstance::sigma)
      .def_readonly("seed", &RegressionInstance::seed)
      .def_property_readonly("p", &RegressionInstance::dimension)
      .def("hash", &RegressionInstance::hash);

  m.def(
      "sample_design",
      [](const RegressionInstance& inst, std::uint64_t replica) {
        return sample_design(inst, replica).X;
      },
      py::arg("instance"), py::arg("replica") = 0);
  m.def("sample_noise", &sample_noise, py::arg("instance"),
        py::arg("replica") = 0);
  m.def("make_response", &make_response, py::arg("X"), py::arg("theta_star"),
        py::arg("eps"));
  m.def("design_to_csv", &design_to_csv, py::arg("X"),
        "Row-major CSV at full round-trip precision");
  m.def(
      "make_theta_star",
      [](std::size_t p, double t, const std::string& mode, std::uint64_t seed,
         std::optional<Eigen::VectorXd> explicit_vec) {
        ThetaMode tm;
        if (mode == "first") {
          tm = ThetaMode::FirstCoordinate;
        } else if (mode == "uniform") {
          tm = ThetaMode::UniformDirection;
        } else if (mode == "explicit") {
          tm = ThetaMode::Explicit;
        } else {
          throw ConfigError("unknown theta mode '" + mode + "'");
        }
        return make_theta_star(p, t, tm, seed,
                               explicit_vec ? &*explicit_vec : nullptr);
      },
      py::arg("p"), py::arg("t"), py::arg("mode") = "uniform",
      py::arg("seed") = 0, py::arg("explicit_vec") = py::none());

  // ---- interpolator -------------------------------------------------------
  py::class_<FitResult>(m, "FitResult")
      .def_readonly("theta_hat", &FitResult::theta_hat)
      .def_readonly("gram_min_eig", &FitResult::gram_min_eig)
      .def_readonly("gram_max_eig", &FitResult::gram_max_eig)
      .def_readonly("interpolation_residual",
                    &FitResult::interpolation_residual)
      .def_readonly("degenerate", &FitResult::degenerate);
  m.def(
      "gram",
      [](const Eigen::MatrixXd& X) {
        GramInfo info = gram(X);
        return py::make_tuple(info.G, info.mu_min, info.mu_max);
      },
      py::arg("X"));
  m.def("min_norm_fit", &min_norm_fit, py::arg("X"), py::arg("y"),
        py::arg("rcond") = 1e-10);
  m.def("min_norm_fit_degenerate", &min_norm_fit_degenerate, py::arg("X"),
        py::arg("y"), py::arg("rcond") = 1e-10);

  // ---- risk ---------------------------------------------------------------
  m.def("excess_risk", &excess_risk, py::arg("theta"), py::arg("theta_star"),
        py::arg("spectrum"));
  m.def("bias_term", &bias_term, py::arg("X"), py::arg("spectrum"),
        py::arg("theta_star"), py::arg("rcond") = 1e-10);
  m.def("variance_trace_direct", &variance_trace_direct, py::arg("X"),
        py::arg("spectrum"), py::arg("rcond") = 1e-10);
  m.def(
      "variance_trace_z",
      [](const Eigen::MatrixXd& X, const Spectrum& spec,
         const std::vector<std::size_t>& smw_indices, double rcond) {
        TraceZResult res = variance_trace_z(X, spec, smw_indices, rcond);
        py::list checks;
        for (const auto& c : res.checks) {
          py::dict d;
          d["index"] = c.index;
          d["lhs"] = c.lhs;
          d["rhs"] = c.rhs;
          d["skipped"] = c.skipped;
          checks.append(d);
        }
        return py::make_tuple(res.total, checks);
      },
      py::arg("X"), py::arg("spectrum"),
      py::arg("smw_indices") = std::vector<std::size_t>{},
      py::arg("rcond") = 1e-10);

  py::class_<RiskReport>(m, "RiskReport")
      .def_property_readonly("bias_term",
                             [](const RiskReport& r) -> py::object {
                               if (r.bias_term) return py::float_(*r.bias_term);
                               return py::none();
                             })
      .def_property_readonly("trace_c",
                             [](const RiskReport& r) -> py::object {
                               if (r.trace_c) return py::float_(*r.trace_c);
                               return py::none();
                             })
      .def_property_readonly("trace_c_alt",
                             [](const RiskReport& r) -> py::object {
                               if (r.trace_c_alt)
                                 return py::float_(*r.trace_c_alt);
                               return py::none();
                             })
      .def_property_readonly("expected_risk_given_X",
                             [](const RiskReport& r) -> py::object {
                               if (r.expected_risk_given_X)
                                 return py::float_(*r.expected_risk_given_X);
                               return py::none();
                             })
      .def_readonly("mc_mean", &RiskReport::mc_mean)
      .def_readonly("mc_stderr", &RiskReport::mc_stderr)
      .def_readonly("replicas", &RiskReport::replicas)
      .def_readonly("failed", &RiskReport::failed)
      .def("to_dict",
           [](const RiskReport& r) { return json_to_py(r.to_json()); });
  m.def(
      "mc_risk",
      [](const RegressionInstance& inst, std::size_t replicas,
         const std::string& mode, int threads) {
        return mc_risk(inst, replicas, parse_mode(mode), threads);
      },
      py::arg("instance"), py::arg("replicas"),
      py::arg("mode") = "fixed-design", py::arg("threads") = 1);

  m.def(
      "eigen_concentration_probe",
      [](const Spectrum& spec, std::size_t n, std::size_t k,
         std::size_t seeds, const std::string& dist, std::uint64_t base_seed,
         int threads) {
        return json_to_py(eigen_concentration_probe(spec, n, k, seeds,
                                                    dist_from_py(dist),
                                                    base_seed, threads)
                              .to_json());
      },
      py::arg("spectrum"), py::arg("n"), py::arg("k"), py::arg("seeds"),
      py::arg("dist") = "gaussian", py::arg("base_seed") = 0,
      py::arg("threads") = 1);

  // ---- theory -------------------------------------------------------------
  m.def(
      "bound_terms",
      [](const Spectrum& spec, std::size_t n, double b, double delta,
         double theta_norm, double sigma_y, double tol) {
        return json_to_py(
            bound_terms(spec, n, b, delta, theta_norm, sigma_y, tol)
                .to_json());
      },
      py::arg("spectrum"), py::arg("n"), py::arg("b") = 5.0,
      py::arg("delta") = 0.1, py::arg("theta_norm") = 1.0,
      py::arg("sigma_y") = 1.0, py::arg("tol") = 1e-8);

  m.def("benign_classify", [](const FamilySpec& family) {
    return json_to_py(benign_classify(family).to_json());
  });
  m.def(
      "benign_scan",
      [](const FamilySpec& family, const std::vector<std::size_t>& n_grid,
         double b, std::size_t seeds, std::size_t replicas, double sigma,
         double theta_norm, const std::string& z_dist,
         std::uint64_t base_seed, int threads) {
        ScanTable table =
            benign_scan(family, n_grid, b, seeds, replicas, sigma, theta_norm,
                        dist_from_py(z_dist), base_seed, threads);
        py::dict out;
        out["csv"] = table.to_csv();
        out["sidecar"] = json_to_py(table.sidecar_json());
        py::list rows;
        for (const auto& row : table.rows) {
          py::dict r;
          r["n"] = row.n;
          r["r0_over_n"] = ext_to_py(row.r0_over_n);
          r["kstar_over_n"] = ext_to_py(row.kstar_over_n);
          r["n_over_Rkstar"] = ext_to_py(row.n_over_Rkstar);
          r["mc_median"] = row.mc_median ? py::object(py::float_(*row.mc_median))
                                         : py::object(py::none());
          r["mc_iqr"] = row.mc_iqr ? py::object(py::float_(*row.mc_iqr))
                                   : py::object(py::none());
          r["seeds"] = row.seeds;
          rows.append(r);
        }
        out["rows"] = rows;
        return out;
      },
      py::arg("family"), py::arg("n_grid"), py::arg("b") = 5.0,
      py::arg("seeds") = 20, py::arg("replicas") = 1, py::arg("sigma") = 1.0,
      py::arg("theta_norm") = 1.0, py::arg("z_dist") = "gaussian",
      py::arg("base_seed") = 0, py::arg("threads") = 1);
}
