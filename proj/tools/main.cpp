// Command-line front end: seeded, reproducible runs of the rank / risk /
// classification machinery with CSV and JSON emission.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "minterp/common.hpp"
#include "minterp/interpolator.hpp"
#include "minterp/num_format.hpp"
#include "minterp/ranks.hpp"
#include "minterp/risk.hpp"
#include "minterp/sampling.hpp"
#include "minterp/spectrum.hpp"
#include "minterp/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace minterp;

namespace {

std::string iso_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_double(item));
  }
  if (out.empty()) throw ConfigError("empty numeric list: '" + text + "'");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(text)) {
    if (v < 0 || v != std::floor(v)) {
      throw ConfigError("expected nonnegative integers: '" + text + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

struct CommonOpts {
  std::string out_dir;
  std::string out_path;   // main JSON destination ("" = stdout)
  std::string csv_path;   // table destination (default under out_dir)
  int threads = 1;
  double tol = 1e-8;
};

struct SpectrumOpts {
  std::string family;
  std::string values;
  std::string file;

  bool provided() const {
    return !family.empty() || !values.empty() || !file.empty();
  }

  Spectrum resolve(std::size_t n_for_rules) const {
    int sources = !family.empty() + !values.empty() + !file.empty();
    if (sources != 1) {
      throw ConfigError(
          "provide exactly one of --family, --values, --spectrum-file");
    }
    if (!family.empty()) {
      return FamilySpec::parse(family).instantiate(n_for_rules);
    }
    if (!values.empty()) {
      return Spectrum::from_values(parse_double_list(values));
    }
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read spectrum file '" + file + "'");
    json j = json::parse(in);
    return Spectrum::from_json(j);
  }

  json echo() const {
    json j;
    if (!family.empty()) j["family"] = family;
    if (!values.empty()) j["values"] = values;
    if (!file.empty()) j["spectrum_file"] = file;
    return j;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  const char* env_dir = std::getenv("MINTERP_OUT_DIR");
  opts.out_dir = env_dir ? env_dir : ".";
  cmd->add_option("--out-dir", opts.out_dir,
                  "Directory for table outputs (env MINTERP_OUT_DIR)");
  cmd->add_option("--out", opts.out_path,
                  "Write the main JSON here instead of stdout");
  cmd->add_option("--csv", opts.csv_path, "Explicit path for the CSV table");
  cmd->add_option("--threads", opts.threads, "Worker threads (default 1)");
  cmd->add_option("--tol", opts.tol, "Tail bracketing tolerance");
}

void add_spectrum(CLI::App* cmd, SpectrumOpts& opts) {
  cmd->add_option("--family", opts.family,
                  "Family spec, e.g. constant:p=10, geometric:q=0.5, "
                  "polylog:alpha=1,beta=2, exponent:alpha=n^-0.5, "
                  "truncpoly:alpha=0.5,p=n^1.5, expiso:tau=1,eps=1e-3,p=1000");
  cmd->add_option("--values", opts.values,
                  "Explicit eigenvalues as a comma list");
  cmd->add_option("--spectrum-file", opts.file, "Spectrum JSON file");
}

std::string resolve_csv_path(const CommonOpts& opts,
                             const std::string& default_name) {
  if (!opts.csv_path.empty()) return opts.csv_path;
  fs::create_directories(opts.out_dir);
  return (fs::path(opts.out_dir) / default_name).string();
}

// CSV files carry the artifact version and resolved config in a leading
// comment and no timestamp, so reruns are byte-identical.
void write_csv(const std::string& path, const json& config,
               const std::string& body, bool append = false) {
  bool exists = fs::exists(path) && fs::file_size(path) > 0;
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  if (!append || !exists) {
    out << "# minterp " << kVersion << " config=" << config.dump() << "\n";
  }
  out << body;
}

void emit_json(const CommonOpts& opts, const json& config,
               const json& result) {
  json envelope;
  envelope["version"] = kVersion;
  envelope["timestamp"] = iso_timestamp();
  envelope["config"] = config;
  envelope["result"] = result;
  std::string text = envelope.dump(2) + "\n";
  if (opts.out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(opts.out_path);
    if (!out) throw ConfigError("cannot write '" + opts.out_path + "'");
    out << text;
  }
}

json ext_json(const ExtReal& v) {
  if (v.is_finite()) return v.value();
  return format_ext(v);
}

// ---------------------------------------------------------------------------

struct RanksCmd {
  CommonOpts common;
  SpectrumOpts spectrum;
  std::size_t n = 100;
  double b = 5.0;
  std::int64_t k_max = -1;

  void run() {
    Spectrum spec = spectrum.resolve(n);
    std::optional<std::size_t> kmax;
    if (k_max >= 0) kmax = static_cast<std::size_t>(k_max);
    RankProfile prof = rank_profile(spec, n, b, kmax, common.tol);

    json config = spectrum.echo();
    config["subcommand"] = "ranks";
    config["n"] = n;
    config["b"] = b;
    config["k_max"] = prof.k_max;
    config["tol"] = common.tol;

    std::string csv = resolve_csv_path(common, "ranks.csv");
    write_csv(csv, config, prof.to_csv());
    json result = prof.header_json();
    result["csv"] = csv;
    result["rows"] = prof.r.size();
    emit_json(common, config, result);
  }
};

struct KStarCmd {
  CommonOpts common;
  SpectrumOpts spectrum;
  std::size_t n = 100;
  double b = 5.0;
  std::int64_t k_max = -1;

  void run() {
    Spectrum spec = spectrum.resolve(n);
    std::optional<std::size_t> kmax;
    if (k_max >= 0) kmax = static_cast<std::size_t>(k_max);
    RankProfile prof = rank_profile(spec, n, b, kmax, common.tol);

    json config = spectrum.echo();
    config["subcommand"] = "kstar";
    config["n"] = n;
    config["b"] = b;
    config["k_max"] = prof.k_max;

    json result;
    if (prof.k_star.finite()) {
      result["k_star"] = *prof.k_star.k;
    } else {
      result["k_star"] = "inf";
      result["reason"] = prof.k_star.reason;
    }
    result["variance_term"] = ext_json(prof.variance_term);
    emit_json(common, config, result);
  }
};

struct InstanceOpts {
  std::size_t n = 100;
  std::int64_t p = -1;  // -1: take the family's finite dimension
  double sigma = 1.0;
  std::string theta_mode = "uniform";
  double theta_norm = 1.0;
  std::string theta_values;
  std::string z_dist = "gaussian";
  std::string noise_dist = "gaussian";
  std::uint64_t seed = 0;
  double rcond = 1e-10;

  void add(CLI::App* cmd) {
    cmd->add_option("--n", n, "Sample size");
    cmd->add_option("--p", p,
                    "Truncate the spectrum to p eigenvalues (required for "
                    "infinite families)");
    cmd->add_option("--sigma", sigma, "Noise standard deviation");
    cmd->add_option("--theta-mode", theta_mode, "first | uniform | explicit");
    cmd->add_option("--theta-norm", theta_norm, "Euclidean norm of theta*");
    cmd->add_option("--theta-values", theta_values,
                    "Explicit theta* as a comma list (theta-mode=explicit)");
    cmd->add_option("--zdist", z_dist, "gaussian | rademacher | uniform");
    cmd->add_option("--noise-dist", noise_dist,
                    "gaussian | rademacher | uniform");
    cmd->add_option("--seed", seed, "Base seed");
    cmd->add_option("--rcond", rcond, "Gram condition cutoff");
  }

  RegressionInstance build(const SpectrumOpts& spectrum_opts,
                           double tol) const {
    Spectrum spec = spectrum_opts.resolve(n);
    double discarded = 0.0;
    if (p >= 0) {
      Truncation trunc = truncate(spec, static_cast<std::size_t>(p), tol);
      spec = std::move(trunc.spectrum);
      discarded = trunc.discarded.divergent ? HUGE_VAL : trunc.discarded.value;
      (void)discarded;
    } else if (!spec.finite_dimension()) {
      throw ConfigError("infinite family: pass --p to truncate");
    }
    RegressionInstance inst;
    inst.spectrum = std::move(spec);
    inst.n = n;
    inst.sigma = sigma;
    inst.z_dist = parse_dist(z_dist);
    inst.noise_dist = parse_dist(noise_dist);
    inst.seed = seed;
    inst.rcond = rcond;
    std::size_t dim = inst.dimension();
    if (theta_mode == "first") {
      inst.theta_star = make_theta_star(dim, theta_norm,
                                        ThetaMode::FirstCoordinate);
    } else if (theta_mode == "uniform") {
      inst.theta_star = make_theta_star(dim, theta_norm,
                                        ThetaMode::UniformDirection, seed);
    } else if (theta_mode == "explicit") {
      std::vector<double> vals = parse_double_list(theta_values);
      Eigen::VectorXd v =
          Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
      inst.theta_star =
          make_theta_star(dim, theta_norm, ThetaMode::Explicit, seed, &v);
    } else {
      throw ConfigError("unknown theta mode '" + theta_mode + "'");
    }
    return inst;
  }

  json echo() const {
    json j;
    j["n"] = n;
    if (p >= 0) j["p"] = p;
    j["sigma"] = sigma;
    j["theta_mode"] = theta_mode;
    j["theta_norm"] = theta_norm;
    j["zdist"] = z_dist;
    j["noise_dist"] = noise_dist;
    j["seed"] = seed;
    j["rcond"] = rcond;
    return j;
  }
};

std::string risk_csv_header() {
  return "n,p,family,params,seed,bias_term,trace_c,expected,mc_mean,"
         "mc_stderr,kstar,variance_term\n";
}

std::string risk_csv_row(const RegressionInstance& inst,
                         const std::string& family_text,
                         const RiskReport& report, const RankProfile& prof) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("n/a");
  };
  std::string family = family_text.empty() ? "explicit" : family_text;
  std::string params;
  auto colon = family.find(':');
  if (colon != std::string::npos) {
    params = family.substr(colon + 1);
    family = family.substr(0, colon);
  }
  return csv_row(
      {std::to_string(inst.n), std::to_string(inst.dimension()), family,
       params, std::to_string(inst.seed), opt(report.bias_term),
       opt(report.trace_c), opt(report.expected_risk_given_X),
       format_double(report.mc_mean), format_double(report.mc_stderr),
       prof.k_star.finite() ? std::to_string(*prof.k_star.k)
                            : std::string("inf"),
       format_ext(prof.variance_term)});
}

struct RiskCmd {
  CommonOpts common;
  SpectrumOpts spectrum;
  InstanceOpts instance;
  double b = 5.0;
  std::size_t replicas = 200;
  std::string mode = "fixed-design";
  std::size_t smw_checks = 0;
  bool monte_carlo = false;

  void run() {
    RegressionInstance inst = instance.build(spectrum, common.tol);
    json config = spectrum.echo();
    config.update(instance.echo());
    config["subcommand"] = monte_carlo ? "risk-mc" : "risk-exact";
    config["b"] = b;
    config["tol"] = common.tol;
    config["threads"] = common.threads;

    RankProfile prof = rank_profile(inst.spectrum, inst.n, b, std::nullopt,
                                    common.tol);

    RiskReport report;
    json result;
    if (monte_carlo) {
      config["replicas"] = replicas;
      config["mode"] = mode;
      report = mc_risk(inst, replicas, parse_mode(mode), common.threads);
      result = report.to_json();
    } else {
      DesignMatrix design = sample_design(inst);
      double bias = bias_term(design.X, inst.spectrum, inst.theta_star,
                              inst.rcond);
      double trace = variance_trace_direct(design.X, inst.spectrum,
                                           inst.rcond);
      std::vector<std::size_t> indices;
      if (smw_checks > 0) {
        config["smw_checks"] = smw_checks;
        std::size_t dim = inst.dimension();
        std::size_t count = std::min(smw_checks, dim);
        for (std::size_t i = 0; i < count; ++i) {
          indices.push_back(1 + (i * dim) / count);
        }
      }
      TraceZResult alt = variance_trace_z(design.X, inst.spectrum, indices,
                                          inst.rcond);
      report.bias_term = bias;
      report.trace_c = trace;
      report.trace_c_alt = alt.total;
      report.expected_risk_given_X = bias + inst.sigma * inst.sigma * trace;
      report.mode = McMode::FixedDesign;
      report.seed = inst.seed;
      report.sigma = inst.sigma;
      result = report.to_json();
      result.erase("mc_mean");
      result.erase("mc_stderr");
      result.erase("replicas");
      result.erase("failed");
      if (!alt.checks.empty()) {
        json checks = json::array();
        for (const auto& c : alt.checks) {
          checks.push_back({{"index", c.index},
                            {"lhs", c.lhs},
                            {"rhs", c.rhs},
                            {"skipped", c.skipped}});
        }
        result["smw_checks"] = std::move(checks);
      }
      result["instance_hash"] = design.instance_hash;
    }
    if (prof.k_star.finite()) {
      result["k_star"] = *prof.k_star.k;
    } else {
      result["k_star"] = "inf";
    }
    result["variance_term"] = ext_json(prof.variance_term);

    std::string csv = resolve_csv_path(common, "risk.csv");
    bool fresh = !fs::exists(csv) || fs::file_size(csv) == 0;
    std::string body = fresh ? risk_csv_header() : std::string();
    body += risk_csv_row(inst, spectrum.family, report, prof);
    write_csv(csv, config, body, /*append=*/true);
    result["csv"] = csv;
    emit_json(common, config, result);
  }
};

struct BenignScanCmd {
  CommonOpts common;
  std::string family;
  std::string n_grid = "64,128,256,512";
  double b = 5.0;
  std::size_t seeds = 20;
  std::size_t replicas = 1;
  double sigma = 1.0;
  double theta_norm = 1.0;
  std::string z_dist = "gaussian";
  std::uint64_t seed = 0;

  void run() {
    FamilySpec spec = FamilySpec::parse(family);
    std::vector<std::size_t> grid = parse_size_list(n_grid);
    ScanTable table =
        benign_scan(spec, grid, b, seeds, replicas, sigma, theta_norm,
                    parse_dist(z_dist), seed, common.threads);

    json config;
    config["subcommand"] = "benign-scan";
    config["family"] = family;
    config["n_grid"] = grid;
    config["b"] = b;
    config["seeds"] = seeds;
    config["replicas"] = replicas;
    config["sigma"] = sigma;
    config["theta_norm"] = theta_norm;
    config["zdist"] = z_dist;
    config["seed"] = seed;
    config["threads"] = common.threads;

    std::string csv = resolve_csv_path(common, "benign_scan.csv");
    write_csv(csv, config, table.to_csv());
    json result = table.sidecar_json();
    result["csv"] = csv;
    json rows = json::array();
    for (const auto& row : table.rows) {
      json r;
      r["n"] = row.n;
      r["r0_over_n"] = ext_json(row.r0_over_n);
      r["kstar_over_n"] = ext_json(row.kstar_over_n);
      r["n_over_Rkstar"] = ext_json(row.n_over_Rkstar);
      if (row.mc_median) r["mc_median"] = *row.mc_median;
      if (row.mc_iqr) r["mc_iqr"] = *row.mc_iqr;
      r["seeds"] = row.seeds;
      rows.push_back(std::move(r));
    }
    result["rows"] = std::move(rows);
    emit_json(common, config, result);
  }
};

struct SpectrumGenCmd {
  CommonOpts common;
  SpectrumOpts spectrum;
  std::size_t n = 100;
  std::size_t count = 16;
  std::int64_t trunc = -1;

  void run() {
    Spectrum spec = spectrum.resolve(n);
    json config = spectrum.echo();
    config["subcommand"] = "spectrum-gen";
    config["n"] = n;
    config["count"] = count;

    json result;
    if (trunc >= 0) {
      config["truncate"] = trunc;
      Truncation t = truncate(spec, static_cast<std::size_t>(trunc),
                              common.tol);
      result["spectrum"] = t.spectrum.to_json();
      result["discarded_mass"] =
          t.discarded.divergent ? json("inf") : json(t.discarded.value);
      spec = std::move(t.spectrum);
    } else {
      result["spectrum"] = spec.to_json();
    }
    std::string body = "i,lambda_i\n";
    std::size_t emit = count;
    if (auto dim = spec.finite_dimension()) emit = std::min(emit, *dim);
    for (std::size_t i = 1; i <= emit; ++i) {
      body += csv_row({std::to_string(i), format_double(spec.eigenvalue(i))});
    }
    std::string csv = resolve_csv_path(common, "spectrum.csv");
    write_csv(csv, config, body);
    result["csv"] = csv;
    emit_json(common, config, result);
  }
};

struct FromRanksCmd {
  CommonOpts common;
  std::string u_text;
  std::string u_file;
  std::int64_t m = -1;

  void run() {
    std::vector<double> u;
    if (!u_text.empty()) {
      u = parse_double_list(u_text);
    } else if (!u_file.empty()) {
      std::ifstream in(u_file);
      if (!in) throw ConfigError("cannot read '" + u_file + "'");
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) u.push_back(parse_double(line));
      }
    } else {
      throw ConfigError("provide --u or --u-file");
    }
    std::size_t length = m >= 0 ? static_cast<std::size_t>(m) : u.size();
    RankSequenceResult res = spectrum_from_ranks(u, length);

    json config;
    config["subcommand"] = "spectrum-from-ranks";
    config["m"] = length;
    if (!u_text.empty()) config["u"] = u_text;
    if (!u_file.empty()) config["u_file"] = u_file;

    json result;
    json values = json::array();
    for (double v : res.values) values.push_back(format_double(v));
    result["values"] = std::move(values);
    result["tail_mass"] = res.tail_mass;
    result["log_tail_mass"] = res.log_tail_mass;
    json realized = json::array();
    for (double v : res.realized_r) realized.push_back(v);
    result["realized_r"] = std::move(realized);
    result["monotone"] = res.monotone;

    std::string body = "k,lambda_k,realized_r\n";
    for (std::size_t i = 0; i < res.values.size(); ++i) {
      body += csv_row({std::to_string(i + 1), format_double(res.values[i]),
                       format_double(res.realized_r[i])});
    }
    std::string csv = resolve_csv_path(common, "spectrum_from_ranks.csv");
    write_csv(csv, config, body);
    result["csv"] = csv;
    emit_json(common, config, result);
  }
};

struct ProbeCmd {
  CommonOpts common;
  SpectrumOpts spectrum;
  std::size_t n = 50;
  std::size_t k = 0;
  std::size_t seeds = 20;
  std::string z_dist = "gaussian";
  std::uint64_t seed = 0;

  void run() {
    Spectrum spec = spectrum.resolve(n);
    ConcentrationProbe probe = eigen_concentration_probe(
        spec, n, k, seeds, parse_dist(z_dist), seed, common.threads);

    json config = spectrum.echo();
    config["subcommand"] = "probe-concentration";
    config["n"] = n;
    config["k"] = k;
    config["seeds"] = seeds;
    config["zdist"] = z_dist;
    config["seed"] = seed;
    emit_json(common, config, probe.to_json());
  }
};

// Injects key=value pairs from a JSON config file as leading CLI tokens;
// explicit flags win because every option takes the last occurrence.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("config file must hold a JSON object");
  }
  std::vector<std::string> tokens;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string value;
    if (it.value().is_string()) {
      value = it.value().get<std::string>();
    } else {
      value = it.value().dump();
    }
    tokens.push_back("--" + it.key() + "=" + value);
  }
  return tokens;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for minimum-norm interpolating "
               "linear regression"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_file;
  app.add_option("--config", config_file,
                 "JSON config file; command-line flags override it")
      ->expected(1);

  RanksCmd ranks_cmd;
  auto* ranks = app.add_subcommand("ranks", "Effective ranks r_k, R_k table");
  add_common(ranks, ranks_cmd.common);
  add_spectrum(ranks, ranks_cmd.spectrum);
  ranks->add_option("--n", ranks_cmd.n, "Sample size for the k* header");
  ranks->add_option("--b", ranks_cmd.b, "Threshold constant b > 1");
  ranks->add_option("--kmax", ranks_cmd.k_max, "Largest k (default 10n)");
  ranks->callback([&] { ranks_cmd.run(); });

  KStarCmd kstar_cmd;
  auto* kstar = app.add_subcommand("kstar", "k* threshold and variance term");
  add_common(kstar, kstar_cmd.common);
  add_spectrum(kstar, kstar_cmd.spectrum);
  kstar->add_option("--n", kstar_cmd.n, "Sample size");
  kstar->add_option("--b", kstar_cmd.b, "Threshold constant b > 1");
  kstar->add_option("--kmax", kstar_cmd.k_max, "Largest k (default 10n)");
  kstar->callback([&] { kstar_cmd.run(); });

  RiskCmd risk_exact_cmd;
  auto* risk_exact = app.add_subcommand(
      "risk-exact", "Exact conditional risk decomposition for one design");
  add_common(risk_exact, risk_exact_cmd.common);
  add_spectrum(risk_exact, risk_exact_cmd.spectrum);
  risk_exact_cmd.instance.add(risk_exact);
  risk_exact->add_option("--b", risk_exact_cmd.b, "Threshold constant");
  risk_exact->add_option("--smw-checks", risk_exact_cmd.smw_checks,
                         "Evaluate the rank-one-update identity on this many "
                         "eigendirections");
  risk_exact->callback([&] { risk_exact_cmd.run(); });

  RiskCmd risk_mc_cmd;
  risk_mc_cmd.monte_carlo = true;
  auto* risk_mc =
      app.add_subcommand("risk-mc", "Monte Carlo excess risk estimate");
  add_common(risk_mc, risk_mc_cmd.common);
  add_spectrum(risk_mc, risk_mc_cmd.spectrum);
  risk_mc_cmd.instance.add(risk_mc);
  risk_mc->add_option("--b", risk_mc_cmd.b, "Threshold constant");
  risk_mc->add_option("--replicas", risk_mc_cmd.replicas, "MC replicas");
  risk_mc->add_option("--mode", risk_mc_cmd.mode,
                      "fixed-design | full-resample");
  risk_mc->callback([&] { risk_mc_cmd.run(); });

  BenignScanCmd scan_cmd;
  auto* scan = app.add_subcommand(
      "benign-scan", "Benign-limit columns across an n grid plus verdict");
  add_common(scan, scan_cmd.common);
  scan->add_option("--family", scan_cmd.family, "Symbolic family spec")
      ->required();
  scan->add_option("--ngrid", scan_cmd.n_grid, "Comma list of sample sizes");
  scan->add_option("--b", scan_cmd.b, "Threshold constant");
  scan->add_option("--seeds", scan_cmd.seeds, "Seeds per grid point");
  scan->add_option("--replicas", scan_cmd.replicas,
                   "Full-resample draws per seed");
  scan->add_option("--sigma", scan_cmd.sigma, "Noise level");
  scan->add_option("--theta-norm", scan_cmd.theta_norm, "Norm of theta*");
  scan->add_option("--zdist", scan_cmd.z_dist, "Covariate distribution");
  scan->add_option("--seed", scan_cmd.seed, "Base seed");
  scan->callback([&] { scan_cmd.run(); });

  SpectrumGenCmd gen_cmd;
  auto* gen = app.add_subcommand("spectrum-gen",
                                 "Materialize a spectrum (optionally "
                                 "truncated, reporting discarded mass)");
  add_common(gen, gen_cmd.common);
  add_spectrum(gen, gen_cmd.spectrum);
  gen->add_option("--n", gen_cmd.n, "Sample size for rate rules");
  gen->add_option("--count", gen_cmd.count, "Eigenvalues to emit");
  gen->add_option("--truncate", gen_cmd.trunc, "Truncate to p eigenvalues");
  gen->callback([&] { gen_cmd.run(); });

  FromRanksCmd from_ranks_cmd;
  auto* from_ranks = app.add_subcommand(
      "spectrum-from-ranks",
      "Eigenvalues realizing a prescribed effective-rank sequence");
  add_common(from_ranks, from_ranks_cmd.common);
  from_ranks->add_option("--u", from_ranks_cmd.u_text,
                         "Rank sequence as a comma list (all entries > 1)");
  from_ranks->add_option("--u-file", from_ranks_cmd.u_file,
                         "Rank sequence file, one value per line");
  from_ranks->add_option("--m", from_ranks_cmd.m, "Output length");
  from_ranks->callback([&] { from_ranks_cmd.run(); });

  ProbeCmd probe_cmd;
  auto* probe = app.add_subcommand(
      "probe-concentration",
      "Extreme eigenvalues of tail Gram matrices across seeds");
  add_common(probe, probe_cmd.common);
  add_spectrum(probe, probe_cmd.spectrum);
  probe->add_option("--n", probe_cmd.n, "Sample size");
  probe->add_option("--k", probe_cmd.k, "Tail start index");
  probe->add_option("--seeds", probe_cmd.seeds, "Number of seeds");
  probe->add_option("--zdist", probe_cmd.z_dist, "Coordinate distribution");
  probe->add_option("--seed", probe_cmd.seed, "Base seed");
  probe->callback([&] { probe_cmd.run(); });

  // Pre-scan for --config and inject its entries before the explicit flags.
  std::vector<std::string> args;
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      config_path = argv[++i];
      continue;
    }
    if (arg.rfind("--config=", 0) == 0) {
      config_path = arg.substr(9);
      continue;
    }
    args.push_back(arg);
  }

  try {
    if (!config_path.empty() && !args.empty()) {
      std::vector<std::string> injected = config_tokens(config_path);
      args.insert(args.begin() + 1, injected.begin(), injected.end());
    }
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    json err;
    err["error"] = {{"kind", e.kind()},
                    {"message", e.what()},
                    {"code", static_cast<int>(e.code())}};
    std::cerr << err.dump() << std::endl;
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"kind", "internal"}, {"message", e.what()}, {"code", 1}};
    std::cerr << err.dump() << std::endl;
    return 1;
  }
}
