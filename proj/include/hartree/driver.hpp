#pragma once

// Experiment driver behind tools/hartree_lab: config ingestion, subcommand
// dispatch and artifact writing. Exit codes: 0 ok, 2 invalid config,
// 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hartree/config.hpp"
#include "hartree/feynman_kac.hpp"
#include "hartree/hamiltonians.hpp"
#include "hartree/io.hpp"
#include "hartree/montecarlo.hpp"
#include "hartree/parallel.hpp"
#include "hartree/rate_function.hpp"
#include "hartree/variational.hpp"
#include "json.hpp"

namespace hartree {

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"sample", "energies", "cgf",    "rate", "chi",       "gp",
                                             "hartree", "free-energy", "tilted", "lln", "trend-gp", "trend-hartree"};
  return s;
}

struct RunRequest {
  std::string subcommand;
  std::string config_path;             ///< empty: defaults only
  std::vector<std::string> overrides;  ///< KEY=VALUE
  std::optional<std::string> out;      ///< overrides the `output` key
  std::optional<std::uint64_t> seed;   ///< overrides the `seed` key
  unsigned threads = 1;
};

struct RunOutcome {
  int exit_code = 0;
  std::string message;
  std::filesystem::path directory;
  std::string fingerprint;
};

namespace detail {

using nlohmann::json;

class RunWriter {
 public:
  RunWriter(std::filesystem::path dir, std::string fp) : dir_(std::move(dir)), fp_(std::move(fp)) {}

  const std::string& fingerprint() const { return fp_; }

  template <GridField F>
  std::string grid_csv(const std::string& name, const F& f) {
    std::ofstream os(dir_ / name, std::ios::binary);
    write_grid_csv(os, f, fp_);
    files_.push_back(name);
    return name;
  }

  /// Table with a leading fingerprint column.
  std::string table(const std::string& name, const std::vector<std::string>& header,
                    const std::vector<std::vector<double>>& rows) {
    std::ofstream os(dir_ / name, std::ios::binary);
    CsvWriter w(os);
    std::vector<std::string> h{"fingerprint"};
    h.insert(h.end(), header.begin(), header.end());
    w.row(h);
    for (const auto& r : rows) {
      std::vector<std::string> fields{fp_};
      for (double x : r) fields.push_back(format_double(x));
      w.row(fields);
    }
    files_.push_back(name);
    return name;
  }

  std::ofstream raw(const std::string& name) {
    files_.push_back(name);
    return std::ofstream(dir_ / name, std::ios::binary);
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::string fp_;
  std::vector<std::string> files_;
};

struct Results {
  json values = json::object();
  json diagnostics = json::object();
  json artifacts = json::object();
};

inline void need(bool ok, std::string_view key, const std::string& what) {
  if (!ok) config_error(key, what);
}

inline void need_paths(const ExperimentConfig& c) {
  need(c.dt <= c.beta / 16.0 * (1.0 + 1e-12), "dt", "must satisfy dt <= beta/16");
}

inline void need_interacting(const ExperimentConfig& c) {
  need(c.dimension == 2 || c.dimension == 3, "dimension", "the interacting model needs d = 2 or 3");
  need(!c.N.empty(), "N", "must list at least one particle number");
  for (int n : c.N) need(n >= 2, "N", "entries must be >= 2 for path ensembles");
  need(c.replicas >= 100, "replicas", "must be >= 100");
  need_paths(c);
}

inline void need_increasing(const std::vector<int>& v, std::string_view key) {
  need(!v.empty(), key, "must be a nonempty list");
  for (std::size_t i = 1; i < v.size(); ++i) need(v[i] > v[i - 1], key, "must be strictly increasing");
}

inline double resolved_alpha(const ExperimentConfig& c) {
  if (c.alpha) return *c.alpha;
  need(c.dimension == 2 || c.dimension == 3, "alpha", "'auto' uses alpha(v), which needs d = 2 or 3");
  return alpha_of_v(c.pair);
}

inline GridFunction make_tilt(const ExperimentConfig& c, const GridSpec& g) {
  switch (c.tilt_kind) {
    case TiltKind::zero: return GridFunction::constant(g, 0.0, FieldRole::tilt);
    case TiltKind::constant: return GridFunction::constant(g, c.tilt_value, FieldRole::tilt);
    case TiltKind::trap: return trap_tilt(c.trap, g);
    case TiltKind::bump:
      return GridFunction::sample(
          g,
          [&](const Point& x) {
            double r2 = 0.0;
            for (int a = 0; a < g.dim(); ++a) r2 += (x[a] - c.init.center[a]) * (x[a] - c.init.center[a]);
            return c.tilt_value * std::exp(-r2 / (c.tilt_width * c.tilt_width));
          },
          FieldRole::tilt);
  }
  return GridFunction::constant(g, 0.0, FieldRole::tilt);
}

inline json to_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

inline McSetup mc_setup(const ExperimentConfig& c, int N) {
  return McSetup{N, c.beta, c.trap, c.pair, c.init, c.grid(), c.dt, c.replicas, c.seed};
}

// ---- subcommands ----------------------------------------------------------

inline void run_sample(const ExperimentConfig& c, RunWriter& w, Results& out) {
  need_paths(c);
  need(!c.N.empty(), "N", "must list at least one particle number");
  const GridSpec g = c.grid();
  json clipped = json::array(), mass = json::array();
  for (int n : c.N) {
    const PathEnsemble ens = sample_paths(n, c.beta, c.dt, c.init, c.dimension, c.seed, 0);
    const DensityField mu = mean_occupation(ens, g);
    clipped.push_back(count_clipped(ens, g));
    mass.push_back(quadrature(mu));
    w.grid_csv("occupation_N" + std::to_string(n) + ".csv", mu);
    if (c.write_paths) {
      auto os = w.raw("paths_N" + std::to_string(n) + ".csv");
      write_paths_csv(os, ens);
    }
  }
  out.values["N"] = c.N;
  out.values["clipped"] = clipped;
  out.values["occupation_mass"] = mass;
}

inline void run_energies(const ExperimentConfig& c, RunWriter&, Results& out) {
  need_paths(c);
  need(c.dimension == 2 || c.dimension == 3, "dimension", "pair energies need d = 2 or 3");
  need(!c.N.empty() && c.N.front() >= 2, "N", "first entry must be >= 2");
  need(c.points % 2 == 1, "grid.points", "intersection local times need an odd node count");
  const GridSpec g = c.grid();
  const double eps = c.mollifier_epsilon > 0.0 ? c.mollifier_epsilon : 3.0 * g.spacing();
  need(eps >= 2.0 * g.spacing(), "mollifier.epsilon", "must be >= 2h");
  const int N = c.N.front();
  const PathEnsemble ens = sample_paths(N, c.beta, c.dt, c.init, c.dimension, c.seed, 0);
  out.values["N"] = N;
  out.values["trap_energy"] = trap_energy(ens, c.trap);
  out.values["pair_energy"] = pair_energy(ens, c.pair);
  out.values["scaled_pair_energy"] = scaled_pair_energy(ens, c.pair);
  if (ens.steps() % 2 == 0) out.values["stride2_bias_estimate"] = scaled_pair_energy_stride_report(ens, c.pair, 1).bias_estimate;
  out.values["mollifier_epsilon"] = eps;
  out.values["mollifier_sup_norm"] = make_mollifier(eps, g).sup_norm();
  out.values["mollified_ilt_zero"] = mollified_ilt_zero(ens, 0, 1, eps, g);
  out.values["mollified_ilt_zero_swapped"] = mollified_ilt_zero_swapped(ens, 0, 1, eps, g);
  out.values["mollified_ilt_zero_diagonal"] = mollified_ilt_zero(ens, 0, 0, eps, g);
  out.diagnostics["clipped"] = count_clipped(ens, g);
}

inline void run_cgf(const ExperimentConfig& c, RunWriter& w, Results& out) {
  if (c.replicas >= 100) need_paths(c);
  const GridSpec g = c.grid();
  const GridFunction f = make_tilt(c, g);
  const TiltedSolve ts = cgf_with_tilted(f, c.beta, c.init, g, c.dt_pde);
  out.values["value"] = ts.cgf;
  out.values["cgf"] = ts.cgf;
  out.values["leakage"] = boundary_leakage(c.beta, c.init, g, c.dt_pde);
  if (c.replicas >= 100) {
    const McValue mc = cgf_mc(f, c.beta, c.init, c.replicas, c.dt, c.seed);
    out.values["cgf_mc"] = mc.estimate;
    out.values["cgf_mc_std_error"] = mc.std_error;
  }
  out.artifacts["tilted_occupation_csv_path"] = w.grid_csv("tilted_occupation.csv", ts.tilted);
}

inline DensityField make_density(const ExperimentConfig& c, const GridSpec& g) {
  switch (c.density_kind) {
    case DensityKind::mean: return tilted_occupation(GridFunction::constant(g, 0.0, FieldRole::tilt), c.beta, c.init, g, c.dt_pde);
    case DensityKind::point: {
      bool clipped = false;
      return DensityField::point_mass(g, g.locate(c.init.center, clipped));
    }
    case DensityKind::gaussian: {
      std::vector<double> v(g.size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (g.on_boundary(i)) continue;
        double r2 = 0.0;
        const Point x = g.node(i);
        for (int a = 0; a < g.dim(); ++a) r2 += (x[a] - c.init.center[a]) * (x[a] - c.init.center[a]);
        v[i] = std::exp(-0.5 * r2 / (c.density_width * c.density_width));
      }
      return normalize(DensityField(g, std::move(v)));
    }
  }
  return {};
}

inline void run_rate(const ExperimentConfig& c, RunWriter& w, Results& out) {
  const GridSpec g = c.grid();
  const DensityField rho = make_density(c, g);
  const auto r = evaluate_J(rho, c.beta, c.init, g, c.rate_tol, c.rate_max_iter, c.dt_pde);
  out.values["value"] = r.value;
  out.values["gap"] = r.gap;
  out.values["iterations"] = r.iterations;
  out.values["converged"] = r.converged ? 1 : 0;
  out.artifacts["f_star_csv_path"] = w.grid_csv("f_star.csv", r.maximizer);
  w.grid_csv("density.csv", rho);
}

inline void write_variational(const VariationalResult& r, RunWriter& w, Results& out, const std::string& prefix) {
  out.values["value"] = r.value;
  out.values["iterations"] = r.iterations;
  out.values["residual"] = r.residual;
  out.values["converged"] = r.converged ? 1 : 0;
  out.values["restart_values"] = r.restart_values;
  out.diagnostics = to_json(r.diagnostics);
  out.artifacts["minimizer_csv_path"] = w.grid_csv(prefix + "minimizer.csv", r.minimizer);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < r.history.size(); ++k) rows.push_back({double(k), r.history[k]});
  w.table(prefix + "history.csv", {"iteration", "objective"}, rows);
}

inline void run_chi(const ExperimentConfig& c, RunWriter& w, Results& out) {
  const GridSpec g = c.grid();
  const double alpha = resolved_alpha(c);
  const auto r = solve_chi_otimes(make_tilt(c, g), c.trap, alpha, c.beta, c.init, g, c.solver);
  write_variational(r, w, out, "");
  out.values["alpha"] = alpha;
}

inline void run_gp(const ExperimentConfig& c, RunWriter& w, Results& out) {
  const double alpha = resolved_alpha(c);
  const auto r = solve_gp(c.trap, alpha, c.grid(), c.solver);
  write_variational(r, w, out, "");
  out.values["alpha"] = alpha;
}


inline void check_hartree(const ExperimentConfig& c, const GridSpec& g) {
  need_increasing(c.N, "N");
  if (!c.pair_rescaled) return;
  need(c.dimension == 2 || c.dimension == 3, "dimension", "rescaled pair potentials need d = 2 or 3");
  const int n = c.N.back();
  need(g.spacing() <= c.pair.range / (2.0 * n) * (1.0 + 1e-12), "grid.points",
       "grid spacing must be <= pair.range/(2N) for N = " + std::to_string(n));
}

inline VariationalResult hartree_for(const ExperimentConfig& c, int N, const GridSpec& g) {
  if (c.pair_rescaled) return solve_hartree(N, c.trap, rescale_pair(c.pair, N), g, c.solver);
  return solve_hartree(N, c.trap, c.pair, g, c.solver);
}

inline void run_hartree(const ExperimentConfig& c, RunWriter& w, Results& out) {
  const GridSpec g = c.grid();
  check_hartree(c, g);
  json chi = json::array(), sweeps = json::array(), conv = json::array();
  std::vector<std::vector<double>> rows;
  for (int N : c.N) {
    const auto r = hartree_for(c, N, g);
    chi.push_back(r.value);
    sweeps.push_back(r.iterations);
    conv.push_back(r.converged ? 1 : 0);
    rows.push_back({double(N), r.value, double(r.iterations), r.converged ? 1.0 : 0.0});
    std::vector<std::vector<double>> hist;
    for (std::size_t k = 0; k < r.history.size(); ++k) hist.push_back({double(k), r.history[k]});
    w.table("sweeps_N" + std::to_string(N) + ".csv", {"sweep", "energy_per_particle"}, hist);
    w.grid_csv("mean_density_N" + std::to_string(N) + ".csv", r.minimizer);
  }
  out.values["N"] = c.N;
  out.values["chi_N"] = chi;
  out.values["sweeps"] = sweeps;
  out.values["converged"] = conv;
  out.artifacts["table_csv_path"] = w.table("hartree.csv", {"N", "chi_N", "sweeps", "converged"}, rows);
}

inline void write_mc_table(const std::vector<int>& Ns, const std::vector<McEstimate>& est, RunWriter& w,
                           Results& out, const std::string& name) {
  json value = json::array(), err = json::array(), ess = json::array(), jensen = json::array();
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < est.size(); ++k) {
    value.push_back(est[k].value);
    err.push_back(est[k].std_error);
    ess.push_back(est[k].ess);
    jensen.push_back(est[k].jensen_bound);
    rows.push_back({double(Ns[k]), est[k].value, est[k].std_error, est[k].ess});
  }
  out.values["N"] = Ns;
  out.values["estimate"] = value;
  out.values["std_error"] = err;
  out.values["ess"] = ess;
  out.diagnostics["jensen_bound"] = jensen;
  out.artifacts["table_csv_path"] = w.table(name, {"N", "estimate", "std_error", "ess"}, rows);
}

inline void run_free_energy(const ExperimentConfig& c, RunWriter& w, Results& out) {
  need_interacting(c);
  std::vector<McEstimate> est;
  for (int N : c.N) est.push_back(free_energy(mc_setup(c, N)));
  write_mc_table(c.N, est, w, out, "free_energy.csv");
}

inline void run_tilted(const ExperimentConfig& c, RunWriter& w, Results& out) {
  need_interacting(c);
  const GridFunction f = make_tilt(c, c.grid());
  std::vector<McEstimate> est;
  for (int N : c.N) est.push_back(tilted_free_energy(f, mc_setup(c, N)));
  write_mc_table(c.N, est, w, out, "tilted.csv");
}

inline void run_lln(const ExperimentConfig& c, RunWriter& w, Results& out) {
  need_interacting(c);
  need_increasing(c.N, "N");
  const GridSpec g = c.grid();
  const double alpha = resolved_alpha(c);
  const auto chi = solve_chi_otimes(GridFunction::constant(g, 0.0, FieldRole::tilt), c.trap, alpha, c.beta, c.init, g,
                                    c.solver);
  json dist = json::array(), ess = json::array();
  std::vector<std::vector<double>> rows;
  for (int N : c.N) {
    const auto occ = weighted_mean_occupation(mc_setup(c, N));
    double d = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) d += g.weight(i) * std::abs(occ.density[i] - chi.minimizer[i]);
    dist.push_back(d);
    ess.push_back(occ.ess);
    rows.push_back({double(N), d, occ.ess});
    w.grid_csv("occupation_N" + std::to_string(N) + ".csv", occ.density);
  }
  out.values["alpha"] = alpha;
  out.values["chi"] = chi.value;
  out.values["N"] = c.N;
  out.values["l1_distance"] = dist;
  out.values["ess"] = ess;
  w.grid_csv("chi_minimizer.csv", chi.minimizer);
  out.artifacts["table_csv_path"] = w.table("lln.csv", {"N", "l1_distance", "ess"}, rows);
}

inline void run_trend_gp(const ExperimentConfig& c, RunWriter& w, Results& out) {
  need(!c.beta_list.empty(), "beta_list", "must be a nonempty list");
  for (std::size_t i = 0; i < c.beta_list.size(); ++i) {
    need(c.beta_list[i] > 0.0, "beta_list", "entries must be positive");
    if (i) need(c.beta_list[i] > c.beta_list[i - 1], "beta_list", "must be strictly increasing");
  }
  const GridSpec g = c.grid();
  const double alpha = resolved_alpha(c);
  const double gp = solve_gp(c.trap, alpha, g, c.solver).value;
  json chi = json::array(), diff = json::array();
  std::vector<std::vector<double>> rows;
  for (double b : c.beta_list) {
    const double v = solve_chi_otimes(GridFunction::constant(g, 0.0, FieldRole::tilt), c.trap, alpha, b, c.init, g,
                                      c.solver)
                         .value;
    chi.push_back(v);
    diff.push_back(std::abs(v - gp));
    rows.push_back({b, v, gp, std::abs(v - gp)});
  }
  out.values["alpha"] = alpha;
  out.values["beta"] = c.beta_list;
  out.values["chi"] = chi;
  out.values["chi_gp"] = gp;
  out.values["abs_difference"] = diff;
  out.artifacts["table_csv_path"] = w.table("trend_gp.csv", {"beta", "chi", "chi_gp", "abs_difference"}, rows);
}

inline void run_trend_hartree(const ExperimentConfig& c, RunWriter& w, Results& out) {
  const GridSpec g = c.grid();
  check_hartree(c, g);
  need(c.dimension == 2 || c.dimension == 3, "dimension", "alpha(v) needs d = 2 or 3");
  const double alpha = alpha_of_v(c.pair);
  const double gp = solve_gp(c.trap, alpha, g, c.solver).value;
  json chi = json::array(), diff = json::array();
  std::vector<std::vector<double>> rows;
  for (int N : c.N) {
    const double v = hartree_for(c, N, g).value;
    chi.push_back(v);
    diff.push_back(std::abs(v - gp));
    rows.push_back({double(N), v, gp, std::abs(v - gp)});
  }
  out.values["alpha"] = alpha;
  out.values["N"] = c.N;
  out.values["chi_N"] = chi;
  out.values["chi_gp"] = gp;
  out.values["abs_difference"] = diff;
  out.artifacts["table_csv_path"] =
      w.table("trend_hartree.csv", {"N", "chi_N", "chi_gp", "abs_difference"}, rows);
}

using Runner = void (*)(const ExperimentConfig&, RunWriter&, Results&);

inline Runner runner_for(const std::string& sub) {
  if (sub == "sample") return run_sample;
  if (sub == "energies") return run_energies;
  if (sub == "cgf") return run_cgf;
  if (sub == "rate") return run_rate;
  if (sub == "chi") return run_chi;
  if (sub == "gp") return run_gp;
  if (sub == "hartree") return run_hartree;
  if (sub == "free-energy") return run_free_energy;
  if (sub == "tilted") return run_tilted;
  if (sub == "lln") return run_lln;
  if (sub == "trend-gp") return run_trend_gp;
  if (sub == "trend-hartree") return run_trend_hartree;
  return nullptr;
}

}  // namespace detail

/// Loads the config, applies overrides, runs one subcommand and writes
/// <output>/<fingerprint prefix>/results.json plus CSV artifacts.
inline RunOutcome run(const RunRequest& req, std::ostream& log = std::cerr) {
  using detail::json;
  RunOutcome outcome;
  ConfigTable table;
  ExperimentConfig cfg;
  const auto runner = detail::runner_for(req.subcommand);
  try {
    if (!runner) fail(ErrorKind::ConfigInvalid, "subcommand: unknown subcommand '" + req.subcommand + "'");
    if (!req.config_path.empty()) {
      std::ifstream in(req.config_path, std::ios::binary);
      if (!in) fail(ErrorKind::ConfigInvalid, "config: cannot read '" + req.config_path + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      table.parse(buf.str(), req.config_path);
    }
    for (const auto& kv : req.overrides) table.apply_override(kv);
    if (req.seed) table.set("seed", std::to_string(*req.seed));
    if (req.out) table.set("output", *req.out);
    cfg = build_config(table);
  } catch (const Error& e) {
    outcome.exit_code = 2;
    outcome.message = e.what();
    log << "error: " << outcome.message << "\n";
    return outcome;
  }

  set_thread_count(std::max(1u, req.threads));
  outcome.fingerprint = table.fingerprint(req.subcommand);
  outcome.directory = std::filesystem::path(cfg.output) / outcome.fingerprint.substr(0, 12);
  detail::Results results;
  bool created = false;
  try {
    created = std::filesystem::create_directories(outcome.directory);
    detail::RunWriter writer(outcome.directory, outcome.fingerprint);
    runner(cfg, writer, results);
    {
      std::ofstream os(outcome.directory / "config.cfg", std::ios::binary);
      os << "# fingerprint: " << outcome.fingerprint << "\n" << table.serialize();
    }
    json doc;
    doc["schema_version"] = 1;
    doc["fingerprint"] = outcome.fingerprint;
    doc["subcommand"] = req.subcommand;
    doc["config"] = table.values();
    doc["conventions"] = {{"chi_prefactor", "none: chi(0) = chi_alpha(beta)"},
                          {"tilt_weight", "exp(beta N <f, mean occupation>)"}};
    doc["values"] = results.values;
    doc["diagnostics"] = results.diagnostics;
    doc["artifacts"] = results.artifacts;
    auto files = writer.files();
    files.push_back("config.cfg");
    std::sort(files.begin(), files.end());
    doc["files"] = files;
    std::ofstream os(outcome.directory / "results.json", std::ios::binary);
    os << doc.dump(2) << "\n";
  } catch (const Error& e) {
    outcome.exit_code = e.kind() == ErrorKind::ConfigInvalid ? 2 : 3;
    outcome.message = (outcome.exit_code == 2 ? std::string() : req.subcommand + ": ") + e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = 3;
    outcome.message = req.subcommand + ": " + e.what();
  }
  if (outcome.exit_code != 0) {
    std::error_code ec;
    if (created) std::filesystem::remove_all(outcome.directory, ec);
    log << "error: " << outcome.message << "\n";
  } else {
    log << "wrote " << (outcome.directory / "results.json").string() << "\n";
  }
  return outcome;
}

}  // namespace hartree
