// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "hartree/driver.hpp"
#include "hartree/hartree.hpp"

using namespace hartree;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const auto kOrigin = InitialDistribution::point();

GridFunction tilt(const GridSpec& g, const std::function<double(const Point&)>& fn) {
  return GridFunction::sample(g, fn, FieldRole::tilt);
}

double l1(const DensityField& a, const DensityField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.grid().size(); ++i) s += a.grid().weight(i) * std::abs(a[i] - b[i]);
  return s;
}

// 1. PDE and Monte Carlo agree on five harmonic tilts.
Outcome pde_vs_mc() {
  struct Case {
    int dim;
    double beta, w;
    int M;
  };
  const Case cases[] = {{1, 0.5, 1.0, 20000}, {1, 1.0, 1.0, 20000}, {1, 1.0, 2.0, 20000},
                        {2, 0.5, 1.0, 10000}, {2, 1.0, 0.5, 10000}};
  Outcome o{true, ""};
  double worst = 0.0;
  for (const auto& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = c.dim == 1 ? make_grid(1, 8.0, 321) : make_grid(2, 6.0, 121);
    const auto f = trap_tilt(TrapSpec::harmonic(c.w), g);
    const double pde = cgf(f, c.beta, kOrigin, g);
    const auto mc = cgf_mc(f, c.beta, kOrigin, c.M, c.beta / 256, 2024);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double z = std::abs(pde - mc.estimate) / mc.std_error;
    worst = std::max(worst, z);
    o.pass = o.pass && z <= 3.0 && secs < 60.0;
    o.detail += fmt("[d=%d b=%g w=%g: pde %.5f mc %.5f+-%.5f %.1fs] ", c.dim, c.beta, c.w, pde, mc.estimate,
                    mc.std_error, secs);
  }
  o.detail += fmt("worst z %.2f", worst);
  return o;
}

// 2. Harmonic-oscillator ground energies.
Outcome oscillator() {
  const auto t0 = std::chrono::steady_clock::now();
  const double e1 = solve_gp(TrapSpec::harmonic(1.0), 0.0, make_grid(1, 6.0, 241)).value;
  const double s1 = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto t1 = std::chrono::steady_clock::now();
  const double e3 = solve_gp(TrapSpec::harmonic(1.0), 0.0, make_grid(3, 5.0, 41)).value;
  const double s3 = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  const bool ok = std::abs(e1 - 1.0) <= 0.01 && std::abs(e3 - 3.0) <= 0.03 && s1 < 30 && s3 < 30;
  return {ok, fmt("d=1 %.6f (%.1fs), d=3 %.6f (%.1fs)", e1, s1, e3, s3)};
}

// 3. J vanishes at the mean occupation density.
Outcome rate_zero() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = make_grid(1, 8.0, 129);
  const auto rho = tilted_occupation(GridFunction::constant(g, 0.0, FieldRole::tilt), 1.0, kOrigin, g);
  const auto r = evaluate_J(rho, 1.0, kOrigin, g, 1e-4, 500);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {r.value <= 1e-3 && r.value >= 0.0 && s < 120, fmt("J = %.3e after %d iterations (%.1fs)", r.value,
                                                            r.iterations, s)};
}

// 4. Weak duality against the trap-shifted lower bound.
Outcome duality() {
  const auto g = make_grid(1, 5.0, 81);
  std::vector<double> v(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!g.on_boundary(i)) v[i] = std::exp(-0.5 * std::pow((g.node(i)[0] - 0.3) / 0.6, 2));
  const auto rho = normalize(DensityField(g, v));
  const auto W = TrapSpec::harmonic(0.5);
  const double J = evaluate_J(rho, 1.0, kOrigin, g, 1e-5, 1000).value;
  std::mt19937_64 eng(404);
  std::normal_distribution<double> nd;
  int pass = 0;
  double worst = -1e300;
  for (int k = 0; k < 20; ++k) {
    const double a = std::abs(nd(eng)), b = nd(eng), c = 2.0 * nd(eng), s = 0.2 + std::abs(nd(eng));
    const auto h = tilt(g, [=](const Point& x) {
      return -a * (1.0 + std::sin(b * x[0] + c)) - std::abs(c) * std::exp(-(x[0] - b) * (x[0] - b) / s);
    });
    const double lb = j_lower_bound(rho, h, W, 1.0, kOrigin, g);
    worst = std::max(worst, lb - J);
    pass += J >= lb - 1e-6;
  }
  return {pass == 20, fmt("%d/20, J = %.6f, max(lb - J) = %.3e", pass, J, worst)};
}

// 5. Mollified intersection local time: both evaluation orders, diagonal bound.
Outcome mollified() {
  const auto g = make_grid(2, 3.0, 31);
  const double eps = 0.6;
  const double sup = make_mollifier(eps, g).sup_norm();
  double worst = 0.0, diag = 0.0;
  bool bound = true;
  for (int r = 0; r < 10; ++r) {
    const auto e = sample_paths(2, 0.5, 1.0 / 32, InitialDistribution::gaussian({0, 0, 0}, 0.3), 2, 55, r);
    const double a = mollified_ilt_zero(e, 0, 1, eps, g);
    const double b = mollified_ilt_zero_swapped(e, 0, 1, eps, g);
    worst = std::max(worst, std::abs(a - b));
    const double d = mollified_ilt_zero(e, 0, 0, eps, g);
    diag = std::max(diag, d);
    bound = bound && d <= sup;
  }
  return {worst <= 1e-8 && bound, fmt("max |order difference| %.2e, max diagonal %.4f <= sup %.4f", worst, diag, sup)};
}

// 6. Gateaux derivative of chi.
Outcome gateaux() {
  const auto g = make_grid(1, 5.0, 61);
  const auto W = TrapSpec::harmonic(1.0);
  const auto f = GridFunction::constant(g, 0.0, FieldRole::tilt);
  std::mt19937_64 eng(66);
  std::normal_distribution<double> nd;
  int pass = 0;
  std::string d;
  for (int k = 0; k < 5; ++k) {
    const double a = nd(eng), b = nd(eng), c = nd(eng), s = 0.5 + std::abs(nd(eng));
    const auto dir = tilt(g, [=](const Point& x) { return a * std::exp(-(x[0] - c) * (x[0] - c) / s) + 0.3 * b * x[0]; });
    const auto rep = gateaux_check(f, dir, W, 0.5, 1.0, kOrigin, g, VarOptions{}, {1e-1, 1e-2});
    pass += rep.monotone;
    d += fmt("[%.2e -> %.2e] ", rep.points[0].error, rep.points[1].error);
  }
  return {pass == 5, fmt("%d/5 monotone ", pass) + d};
}

// 7. Non-interacting free energy factorises.
Outcome factorised() {
  const auto W = TrapSpec::harmonic(1.0);
  const double beta = 1.0;
  const auto fine = make_grid(2, 5.0, 81);
  const double oracle = cgf(trap_tilt(W, fine), beta, kOrigin, fine) / beta;
  McSetup s;
  s.beta = beta;
  s.W = W;
  s.v = PairSpec::ball(0.0, 1.0, 2);
  s.init = kOrigin;
  s.grid = make_grid(2, 5.0, 51);
  s.dt = beta / 64;
  s.M = 4000;
  s.seed = 7;
  std::vector<McEstimate> est;
  bool ok = true;
  std::string d = fmt("oracle %.5f; ", oracle);
  for (int N : {2, 4, 8}) {
    s.N = N;
    est.push_back(free_energy(s));
    ok = ok && std::abs(est.back().value - oracle) <= 3.0 * est.back().std_error;
    d += fmt("N=%d %.5f+-%.5f ", N, est.back().value, est.back().std_error);
  }
  for (std::size_t a = 0; a < est.size(); ++a)
    for (std::size_t b = a + 1; b < est.size(); ++b)
      ok = ok && std::abs(est[a].value - est[b].value) <=
                     3.0 * std::hypot(est[a].std_error, est[b].std_error);
  return {ok, d};
}

// 8. Weighted mean occupation approaches the chi minimizer.
Outcome lln() {
  const auto t0 = std::chrono::steady_clock::now();
  const double beta = 0.5;
  const auto v = PairSpec::ball(4.0, 1.0, 2);
  const auto g = make_grid(2, 3.0, 31);
  const auto W = TrapSpec::harmonic(1.0);
  const auto chi = solve_chi_otimes(GridFunction::constant(g, 0.0, FieldRole::tilt), W, alpha_of_v(v), beta, kOrigin, g);
  McSetup s;
  s.beta = beta;
  s.W = W;
  s.v = v;
  s.init = kOrigin;
  s.grid = g;
  s.dt = beta / 64;
  s.M = 4096;
  s.seed = 8;
  std::vector<double> dist;
  std::string d;
  for (int N : {2, 4, 8}) {
    s.N = N;
    const auto occ = weighted_mean_occupation(s);
    dist.push_back(l1(occ.density, chi.minimizer));
    d += fmt("N=%d %.4f (ess %.0f) ", N, dist.back(), occ.ess);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {dist.back() < dist.front() && secs < 1800, d + fmt("chi %.4f, %.1fs", chi.value, secs)};
}

// 9. Hartree sanity and large-N trend.
Outcome hartree_checks(const fs::path& scratch) {
  const auto g = make_grid(2, 4.0, 65);
  const auto W = TrapSpec::harmonic(1.0);
  const auto v = PairSpec::ball(1.0, 1.0, 2);
  const double gp0 = solve_gp(W, 0.0, g).value;
  const double h1 = solve_hartree(1, W, v, g).value;
  bool monotone = true;
  for (int N : {2, 4}) {
    const auto r = solve_hartree(N, W, rescale_pair(v, N), g);
    for (std::size_t k = 1; k < r.history.size(); ++k) monotone = monotone && r.history[k] <= r.history[k - 1] + 1e-12;
  }
  RunRequest req;
  req.subcommand = "trend-hartree";
  req.out = scratch.string();
  req.overrides = {"dimension=2", "grid.half_width=4", "grid.points=65", "N=1,2,4", "pair.family=ball",
                   "pair.strength=1", "pair.range=1"};
  std::ostringstream log;
  const auto out = run(req, log);
  if (out.exit_code != 0) return {false, "trend-hartree failed: " + out.message};
  std::ifstream in(out.directory / "results.json");
  const auto doc = nlohmann::json::parse(in);
  const auto diff = doc["values"]["abs_difference"].get<std::vector<double>>();
  bool trend = diff.size() == 3;
  for (std::size_t k = 0; k < diff.size(); ++k) {
    trend = trend && std::isfinite(diff[k]);
    if (k) trend = trend && diff[k] <= diff[k - 1];
  }
  const bool ok = std::abs(h1 - gp0) <= 1e-6 && monotone && trend;
  std::string d = fmt("N=1 %.8f vs GP %.8f; sweeps %s; |chi_N - chi_GP| =", h1, gp0, monotone ? "monotone" : "NOT monotone");
  for (double x : diff) d += fmt(" %.4f", x);
  return {ok, d};
}

// 10. Identical fingerprints give byte-identical results.json.
Outcome reproducible(const fs::path& scratch) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
      {"free-energy", {"dimension=2", "grid.points=21", "N=3", "replicas=300", "dt=0.0625", "pair.strength=2"}},
      {"chi", {"grid.points=41", "alpha=0.5"}},
      {"lln", {"dimension=2", "grid.points=21", "grid.half_width=3", "N=2,4", "replicas=200", "dt=0.0625"}},
  };
  int same = 0;
  for (const auto& [sub, sets] : runs) {
    std::string text[2];
    std::string fp[2];
    for (int k = 0; k < 2; ++k) {
      RunRequest req;
      req.subcommand = sub;
      req.overrides = sets;
      req.out = (scratch / "rep").string();
      req.threads = k == 0 ? 1 : 2;
      std::ostringstream log;
      const auto out = run(req, log);
      if (out.exit_code != 0) return {false, sub + " failed: " + out.message};
      std::ifstream in(out.directory / "results.json", std::ios::binary);
      std::stringstream s;
      s << in.rdbuf();
      text[k] = s.str();
      fp[k] = out.fingerprint;
      fs::remove_all(out.directory);
    }
    same += fp[0] == fp[1] && text[0] == text[1];
  }
  return {same == static_cast<int>(runs.size()), fmt("%d/%zu subcommands byte-identical across reruns", same, runs.size())};
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / "hartree_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 pde-mc agreement", pde_vs_mc},
      {"2 oscillator eigenvalue", oscillator},
      {"3 rate function zero at mean", rate_zero},
      {"4 duality soundness", duality},
      {"5 mollified ilt identity", mollified},
      {"6 gateaux derivative", gateaux},
      {"7 factorised free energy", factorised},
      {"8 lln trend", lln},
      {"9 hartree sanity", [&] { return hartree_checks(scratch); }},
      {"10 reproducibility", [&] { return reproducible(scratch); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(scratch);
  return failed == 0 ? 0 : 1;
}
