#pragma once

// Solvers for
//   chi(f)   = inf_rho J_beta(rho) + <W - f, rho> + 4 pi alpha int rho^2,
//   chi^GP   = inf_|phi|=1 |grad phi|^2 + <W, phi^2> + 4 pi alpha int phi^4,
//   chi_N    = (1/N) inf_h sum_i (|grad h_i|^2 + <W, h_i^2>) + sum_{i<j} <h_i^2, V h_j^2>,
// and the finite-difference check of d/dt chi(f + t g) = -<g, rho_f>.
//
// chi(0) is chi_alpha(beta): no 1/beta prefactor on J.

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hartree/error.hpp"
#include "hartree/feynman_kac.hpp"
#include "hartree/grid.hpp"
#include "hartree/paths.hpp"
#include "hartree/potentials.hpp"
#include "hartree/rate_function.hpp"

namespace hartree {

enum class ChiMethod {
  dual_mirror,  ///< mirror descent with the Lambda_beta mirror map (iterates on tilts)
  entropic,     ///< rho <- normalize(rho exp(-eta g)) with the inner J ascent
};

struct VarOptions {
  double step = 1.0;  ///< initial eta (chi) or multiplier on the stable tau (GP, Hartree)
  int max_iter = 20000;
  double tol = 1e-10;        ///< objective decrease (chi, Hartree sweeps) or residual norm (GP flow)
  double inner_tol = 1e-5;   ///< J ascent gap for the entropic method
  int inner_max_iter = 300;
  int restarts = 0;          ///< extra random initialisations
  std::uint64_t seed = 1;
  double dt_pde = 0.0;
  ChiMethod method = ChiMethod::dual_mirror;
  int max_sweeps = 200;      ///< Hartree
  bool strict = false;       ///< Hartree: throw NonConvergent instead of flagging
  std::vector<double> warm_start;  ///< initial tilt for chi (dual method)
};

struct VariationalResult {
  double value = 0.0;
  DensityField minimizer;             ///< phi*^2, or the mean of the Hartree h_i^2
  std::vector<DensityField> orbitals; ///< Hartree h_i^2
  GridFunction tilt;                  ///< chi: final dual iterate (rho = rho_tilt)
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::map<std::string, double> diagnostics;
  std::vector<double> history;         ///< objective per accepted iterate or sweep
  std::vector<double> restart_values;  ///< value per initialisation, first is the default start
};

namespace detail {

inline double weighted_sum(const GridSpec& g, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += g.weight(i) * a[i] * b[i];
  return s;
}

/// Smooth random field: a few low Fourier modes on the box.
inline std::vector<double> random_smooth(const GridSpec& grid, std::mt19937_64& eng, double amplitude) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 2.0 * std::numbers::pi);
  const int modes = 4;
  std::vector<std::array<double, 5>> m(modes);
  for (auto& c : m) c = {nd(eng), nd(eng), nd(eng), ud(eng), amplitude * nd(eng) / modes};
  std::vector<double> out(grid.size(), 0.0);
  const double L = grid.half_width();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Point x = grid.node(i);
    double s = 0.0;
    for (const auto& c : m) {
      double phase = c[3];
      for (int a = 0; a < grid.dim(); ++a) phase += c[a] * x[a] / L;
      s += c[4] * std::cos(phase);
    }
    out[i] = s;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// chi(f)

namespace detail {

struct ChiState {
  std::vector<double> tilt;
  std::vector<double> rho;
  double objective = 0.0;
  double rate = 0.0, trap = 0.0, tilt_term = 0.0, quartic = 0.0;
};

struct ChiProblem {
  const GridFunction& f;
  std::vector<double> w_eff;  ///< W with the hard wall replaced by the tilt floor
  double alpha;
  double beta;
  const InitialDistribution& init;
  const GridSpec& grid;
  double dt_pde;

  void score(ChiState& s, double rate) const {
    s.rate = rate;
    s.trap = weighted_sum(grid, w_eff, s.rho);
    s.tilt_term = -weighted_sum(grid, f.values(), s.rho);
    s.quartic = 4.0 * std::numbers::pi * alpha * weighted_sum(grid, s.rho, s.rho);
    s.objective = s.rate + s.trap + s.tilt_term + s.quartic;
  }

  /// Dual coordinates: rho = rho_tilt and J(rho) = <tilt, rho> - Lambda(tilt).
  std::optional<ChiState> at_tilt(std::vector<double> tilt) const {
    ChiState s;
    GridFunction g(grid, tilt, FieldRole::tilt);
    TiltedSolve ts;
    try {
      ts = cgf_with_tilted(g, beta, init, grid, dt_pde);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NonPositiveMass) return std::nullopt;
      throw;
    }
    s.rho.assign(ts.tilted.values().begin(), ts.tilted.values().end());
    s.tilt = std::move(tilt);
    score(s, weighted_sum(grid, s.tilt, s.rho) - ts.cgf);
    if (!std::isfinite(s.objective)) return std::nullopt;
    return s;
  }

  /// Fixed point map of the optimality condition: f - W - 8 pi alpha rho.
  std::vector<double> target(const ChiState& s) const {
    std::vector<double> t(grid.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = f[i] - w_eff[i] - 8.0 * std::numbers::pi * alpha * s.rho[i];
    return t;
  }
};

inline VariationalResult finish_chi(const ChiProblem& P, const ChiState& s, int it, bool converged,
                                    double residual, std::vector<double> history) {
  VariationalResult r;
  r.value = s.objective;
  r.minimizer = DensityField(P.grid, s.rho);
  r.tilt = GridFunction(P.grid, s.tilt, FieldRole::tilt);
  r.iterations = it;
  r.converged = converged;
  r.residual = residual;
  r.history = std::move(history);
  r.diagnostics = {{"rate", s.rate}, {"trap", s.trap}, {"tilt", s.tilt_term}, {"quartic", s.quartic}};
  return r;
}

inline VariationalResult chi_dual(const ChiProblem& P, std::vector<double> tilt0, const VarOptions& opt) {
  auto start = P.at_tilt(std::move(tilt0));
  require(start.has_value(), ErrorKind::DivergedObjective, "chi objective not finite at the initial tilt");
  ChiState cur = std::move(*start);
  std::vector<double> history{cur.objective};
  double eta = std::min(1.0, opt.step);
  double residual = 0.0;
  int it = 0;
  bool converged = false;
  while (it < opt.max_iter) {
    const auto tgt = P.target(cur);
    std::optional<ChiState> next;
    while (eta >= 1e-12) {
      std::vector<double> g(cur.tilt.size());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = (1.0 - eta) * cur.tilt[i] + eta * tgt[i];
      auto trial = P.at_tilt(std::move(g));
      if (trial && trial->objective <= cur.objective) {
        next = std::move(trial);
        break;
      }
      eta *= 0.5;
    }
    if (!next) {  // no decrease at any step: stationary to working precision
      converged = true;
      break;
    }
    ++it;
    residual = cur.objective - next->objective;
    cur = std::move(*next);
    history.push_back(cur.objective);
    if (residual < opt.tol) {
      converged = true;
      break;
    }
    eta = std::min(std::min(1.0, opt.step), 2.0 * eta);
  }
  return finish_chi(P, cur, it, converged, residual, std::move(history));
}

inline VariationalResult chi_entropic(const ChiProblem& P, std::vector<double> tilt0, const VarOptions& opt) {
  const GridSpec& grid = P.grid;
  auto start = P.at_tilt(std::move(tilt0));
  require(start.has_value(), ErrorKind::DivergedObjective, "chi objective not finite at the initial density");
  ChiState cur = std::move(*start);
  GridFunction fstar = GridFunction(grid, cur.tilt, FieldRole::tilt);

  // Evaluates the objective at a density through the inner ascent.
  auto at_density = [&](std::vector<double> rho, const GridFunction& warm) -> std::pair<ChiState, GridFunction> {
    ChiState s;
    s.rho = std::move(rho);
    const auto J = evaluate_J(DensityField(grid, s.rho), P.beta, P.init, grid, opt.inner_tol, opt.inner_max_iter,
                              P.dt_pde, &warm);
    s.tilt.assign(J.maximizer.values().begin(), J.maximizer.values().end());
    P.score(s, J.value);
    return {s, J.maximizer};
  };
  {
    auto [s, fs] = at_density(cur.rho, fstar);
    cur = std::move(s);
    fstar = std::move(fs);
  }
  std::vector<double> history{cur.objective};
  double eta = opt.step;
  double residual = 0.0;
  int it = 0;
  bool converged = false;
  while (it < opt.max_iter) {
    std::vector<double> grad(grid.size());
    for (std::size_t i = 0; i < grad.size(); ++i)
      grad[i] = cur.tilt[i] + P.w_eff[i] - P.f[i] + 8.0 * std::numbers::pi * P.alpha * cur.rho[i];
    std::optional<std::pair<ChiState, GridFunction>> next;
    while (eta >= 1e-10) {
      std::vector<double> rho(grid.size(), 0.0);
      for (std::size_t i = 0; i < rho.size(); ++i)
        if (cur.rho[i] > 0.0) rho[i] = cur.rho[i] * std::exp(-eta * grad[i]);
      const DensityField n = normalize(DensityField(grid, std::move(rho)));
      auto trial = at_density(std::vector<double>(n.values().begin(), n.values().end()), fstar);
      if (trial.first.objective <= cur.objective) {
        next = std::move(trial);
        break;
      }
      eta *= 0.5;
    }
    if (!next) {
      converged = true;
      break;
    }
    ++it;
    residual = cur.objective - next->first.objective;
    cur = std::move(next->first);
    fstar = std::move(next->second);
    history.push_back(cur.objective);
    if (residual < opt.tol) {
      converged = true;
      break;
    }
    eta *= 1.5;
  }
  return finish_chi(P, cur, it, converged, residual, std::move(history));
}

}  // namespace detail

/// chi(f) for trap W and quartic strength alpha. Throws DivergedObjective,
/// InfeasibleTrap.
inline VariationalResult solve_chi_otimes(const GridFunction& f, const TrapSpec& W, double alpha, double beta,
                                          const InitialDistribution& init, const GridSpec& grid,
                                          const VarOptions& opts = {}) {
  require(f.grid() == grid, ErrorKind::GridMismatch, "tilt lives on a different grid");
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidArgument, "alpha must be >= 0");
  for (double x : f.values()) require(std::isfinite(x), ErrorKind::NonFiniteValue, "tilt f must be bounded");
  require(opts.step > 0.0 && opts.max_iter > 0 && opts.tol > 0.0, ErrorKind::InvalidArgument,
          "solver options must be positive");

  const GridFunction offset = trap_tilt(W, grid);
  std::vector<double> w_eff(grid.size());
  for (std::size_t i = 0; i < w_eff.size(); ++i) w_eff[i] = -offset[i];
  {
    const DensityField rho0 = init.density(grid);
    double feasible = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!grid.on_boundary(i) && std::isfinite(eval_trap(W, grid.node(i), grid.dim()))) feasible += rho0[i];
    require(feasible > 0.0, ErrorKind::InfeasibleTrap, "hard wall excludes the whole initial support");
  }
  detail::ChiProblem P{f, std::move(w_eff), alpha, beta, init, grid, opts.dt_pde};
  auto run = [&](std::vector<double> tilt0) {
    return opts.method == ChiMethod::dual_mirror ? detail::chi_dual(P, std::move(tilt0), opts)
                                                 : detail::chi_entropic(P, std::move(tilt0), opts);
  };

  std::vector<double> t0(grid.size(), 0.0);
  if (!opts.warm_start.empty()) {
    require(opts.warm_start.size() == grid.size(), ErrorKind::GridMismatch, "warm start has the wrong size");
    t0 = opts.warm_start;
  }
  VariationalResult best = run(std::move(t0));
  best.restart_values.push_back(best.value);
  std::mt19937_64 eng(opts.seed);
  for (int r = 0; r < opts.restarts; ++r) {
    VariationalResult cand = run(detail::random_smooth(grid, eng, 2.0));
    best.restart_values.push_back(cand.value);
    if (cand.value < best.value) {
      cand.restart_values = std::move(best.restart_values);
      best = std::move(cand);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Normalised gradient flow shared by GP and Hartree

namespace detail {

struct FlowResult {
  std::vector<double> phi;
  double energy = 0.0;
  double kinetic = 0.0, potential = 0.0, quartic = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

/// Minimises K(phi) + <U, phi^2> + c4 int phi^4 over unit-norm phi that
/// vanish on the boundary and where U is infinite. K is the discrete
/// Dirichlet form sum over grid edges of h^d ((phi_a - phi_b)/h)^2.
class GradientFlow {
 public:
  GradientFlow(const GridSpec& grid, std::vector<double> U, double c4) : grid_(grid), U_(std::move(U)), c4_(c4) {
    active_.assign(grid.size(), 0);
    for (std::size_t i = 0; i < grid.size(); ++i) active_[i] = !grid.on_boundary(i) && std::isfinite(U_[i]);
  }

  double energy(const std::vector<double>& phi, double* kin = nullptr, double* pot = nullptr,
                double* quart = nullptr) const {
    const double hd = grid_.cell_volume();
    const double h2 = grid_.spacing() * grid_.spacing();
    double k = 0.0, p = 0.0, q = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      if (!active_[i]) continue;
      p += U_[i] * phi[i] * phi[i];
      q += phi[i] * phi[i] * phi[i] * phi[i];
    }
    // Each edge once: from every node to its +1 neighbour on each axis.
    const Index lim{grid_.points_per_axis(), grid_.dim() > 1 ? grid_.points_per_axis() : 1,
                    grid_.dim() > 2 ? grid_.points_per_axis() : 1};
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const Index idx = grid_.unflatten(i);
      for (int a = 0; a < grid_.dim(); ++a) {
        if (idx[a] + 1 >= lim[a]) continue;
        const double d = phi[i + grid_.stride(a)] - phi[i];
        k += d * d;
      }
    }
    k *= hd / h2;
    p *= hd;
    q *= hd * c4_;
    if (kin) *kin = k;
    if (pot) *pot = p;
    if (quart) *quart = q;
    return k + p + q;
  }

  /// Half-gradient per unit weight: -Delta_h phi + U phi + 2 c4 phi^3.
  void half_gradient(const std::vector<double>& phi, std::vector<double>& out) const {
    const double inv_h2 = 1.0 / (grid_.spacing() * grid_.spacing());
    out.assign(phi.size(), 0.0);
    for (std::size_t i = 0; i < phi.size(); ++i) {
      if (!active_[i]) continue;
      double lap = -2.0 * grid_.dim() * phi[i];
      for (int a = 0; a < grid_.dim(); ++a) {
        const std::size_t s = grid_.stride(a);
        lap += phi[i + s] + phi[i - s];  // active nodes are interior
      }
      out[i] = -lap * inv_h2 + U_[i] * phi[i] + 2.0 * c4_ * phi[i] * phi[i] * phi[i];
    }
  }

  void normalize(std::vector<double>& phi) const {
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      if (!active_[i]) phi[i] = 0.0;
      s += phi[i] * phi[i];
    }
    s *= grid_.cell_volume();
    require(s > 0.0 && std::isfinite(s), ErrorKind::DivergedObjective, "orbital norm vanished");
    const double inv = 1.0 / std::sqrt(s);
    for (double& x : phi) x *= inv;
  }

  FlowResult run(std::vector<double> phi, const VarOptions& opt) const {
    normalize(phi);
    double umax = 0.0, pmax = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i)
      if (active_[i]) {
        umax = std::max(umax, std::abs(U_[i]));
        pmax = std::max(pmax, phi[i] * phi[i]);
      }
    const double h2 = grid_.spacing() * grid_.spacing();
    double tau = opt.step / (4.0 * grid_.dim() / h2 + umax + 6.0 * c4_ * pmax);

    FlowResult r;
    r.energy = energy(phi);
    r.history.push_back(r.energy);
    std::vector<double> g, trial;
    const double hd = grid_.cell_volume();
    for (r.iterations = 0; r.iterations < opt.max_iter;) {
      half_gradient(phi, g);
      double mu = 0.0;
      for (std::size_t i = 0; i < phi.size(); ++i) mu += g[i] * phi[i];
      mu *= hd;
      double res = 0.0;
      for (std::size_t i = 0; i < phi.size(); ++i) {
        const double d = g[i] - mu * phi[i];
        res += d * d;
      }
      r.residual = std::sqrt(res * hd);
      if (r.residual <= opt.tol) {
        r.converged = true;
        break;
      }
      bool accepted = false;
      while (tau > 1e-14) {
        trial = phi;
        for (std::size_t i = 0; i < phi.size(); ++i) trial[i] -= tau * g[i];
        normalize(trial);
        const double e = energy(trial);
        if (std::isfinite(e) && e <= r.energy) {
          phi.swap(trial);
          r.energy = e;
          accepted = true;
          break;
        }
        tau *= 0.5;
      }
      if (!accepted) {  // stationary to working precision
        r.converged = true;
        break;
      }
      ++r.iterations;
      r.history.push_back(r.energy);
    }
    r.energy = energy(phi, &r.kinetic, &r.potential, &r.quartic);
    r.phi = std::move(phi);
    return r;
  }

  const GridSpec& grid() const { return grid_; }
  bool active(std::size_t i) const { return active_[i]; }

 private:
  GridSpec grid_;
  std::vector<double> U_;
  double c4_;
  std::vector<char> active_;
};

/// Default start: a centred Gaussian of width a third of the box.
inline std::vector<double> default_orbital(const GridSpec& grid) {
  const double s = grid.half_width() / 3.0;
  std::vector<double> phi(grid.size());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = std::exp(-0.5 * norm2(grid.node(i), grid.dim()) / (s * s));
  return phi;
}

inline std::vector<double> random_orbital(const GridSpec& grid, std::mt19937_64& eng) {
  auto phi = default_orbital(grid);
  const auto noise = random_smooth(grid, eng, 1.0);
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] *= std::exp(noise[i]);
  return phi;
}

inline std::vector<double> trap_values(const TrapSpec& W, const GridSpec& grid) {
  std::vector<double> U(grid.size());
  for (std::size_t i = 0; i < U.size(); ++i) U[i] = eval_trap(W, grid.node(i), grid.dim());
  return U;
}

inline DensityField squared(const GridSpec& grid, const std::vector<double>& phi) {
  std::vector<double> v(phi.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = phi[i] * phi[i];
  return DensityField(grid, std::move(v));
}

}  // namespace detail

/// Gross-Pitaevskii ground state by normalised gradient flow.
inline VariationalResult solve_gp(const TrapSpec& W, double alpha, const GridSpec& grid, const VarOptions& opts = {}) {
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidArgument, "alpha must be >= 0");
  require(opts.step > 0.0 && opts.max_iter > 0 && opts.tol > 0.0, ErrorKind::InvalidArgument,
          "solver options must be positive");
  const detail::GradientFlow flow(grid, detail::trap_values(W, grid), 4.0 * std::numbers::pi * alpha);
  auto pack = [&](detail::FlowResult fr) {
    VariationalResult r;
    r.value = fr.energy;
    r.minimizer = detail::squared(grid, fr.phi);
    r.residual = fr.residual;
    r.iterations = fr.iterations;
    r.converged = fr.converged;
    r.history = std::move(fr.history);
    r.diagnostics = {{"kinetic", fr.kinetic}, {"trap", fr.potential}, {"quartic", fr.quartic}};
    return r;
  };
  VariationalResult best = pack(flow.run(detail::default_orbital(grid), opts));
  best.restart_values.push_back(best.value);
  std::mt19937_64 eng(opts.seed);
  for (int r = 0; r < opts.restarts; ++r) {
    VariationalResult cand = pack(flow.run(detail::random_orbital(grid, eng), opts));
    best.restart_values.push_back(cand.value);
    if (cand.value < best.value) {
      cand.restart_values = std::move(best.restart_values);
      best = std::move(cand);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Hartree product states

namespace detail {
template <RadialPotential V>
void check_hartree_resolution(const V&, const GridSpec&) {}

inline void check_hartree_resolution(const RescaledPair& v, const GridSpec& grid) {
  require(grid.dim() == 2 || grid.dim() == 3, ErrorKind::UnsupportedDimension,
          "rescaled pair potentials need d = 2 or 3");
  require(grid.spacing() <= v.base.range / (2.0 * v.N) * (1.0 + 1e-12), ErrorKind::InvalidResolution,
          "grid spacing must be <= range/(2N) to resolve the rescaled pair potential");
}
}  // namespace detail

/// chi_N by cyclic orbital updates: each h_i is replaced by the ground
/// state of -Delta + W + sum_{j != i} V h_j^2. All orbitals start from the
/// same profile. A run that exhausts max_sweeps returns its last iterate
/// with converged = false.
template <RadialPotential V>
VariationalResult solve_hartree(int N, const TrapSpec& W, const V& v, const GridSpec& grid,
                                const VarOptions& opts = {}) {
  require(N >= 1, ErrorKind::InvalidArgument, "N must be >= 1");
  require(opts.step > 0.0 && opts.max_iter > 0 && opts.tol > 0.0 && opts.max_sweeps > 0,
          ErrorKind::InvalidArgument, "solver options must be positive");
  detail::check_hartree_resolution(v, grid);
  const auto trap = detail::trap_values(W, grid);
  const std::size_t size = grid.size();

  auto run = [&](std::vector<double> start) {
    std::vector<std::vector<double>> phi(static_cast<std::size_t>(N), start);
    std::vector<std::vector<double>> Vh(static_cast<std::size_t>(N));
    GridFunction kernel;
    if (N > 1) kernel = pair_kernel(v, grid);
    auto potential_of = [&](const std::vector<double>& h) {
      std::vector<double> h2(size);
      for (std::size_t i = 0; i < size; ++i) h2[i] = h[i] * h[i];
      const GridFunction conv = convolve(GridFunction(grid, std::move(h2)), kernel);
      return std::vector<double>(conv.values().begin(), conv.values().end());
    };
    {
      const detail::GradientFlow flow(grid, trap, 0.0);
      for (auto& p : phi) flow.normalize(p);
    }
    if (N > 1)
      for (int i = 0; i < N; ++i) Vh[i] = potential_of(phi[i]);

    auto total = [&](double* kin, double* trp, double* pair) {
      const detail::GradientFlow flow(grid, trap, 0.0);
      double k = 0.0, t = 0.0, p = 0.0;
      for (int i = 0; i < N; ++i) {
        double ki = 0.0, ti = 0.0;
        flow.energy(phi[i], &ki, &ti);
        k += ki;
        t += ti;
        for (int j = i + 1; j < N; ++j) {
          std::vector<double> hi2(size);
          for (std::size_t x = 0; x < size; ++x) hi2[x] = phi[i][x] * phi[i][x];
          p += detail::weighted_sum(grid, hi2, Vh[j]);
        }
      }
      if (kin) *kin = k;
      if (trp) *trp = t;
      if (pair) *pair = p;
      return k + t + p;
    };

    VariationalResult r;
    double E = total(nullptr, nullptr, nullptr);
    r.history.push_back(E / N);
    int sweep = 0;
    int inner = 0;
    double change = 0.0;
    for (; sweep < opts.max_sweeps; ++sweep) {
      for (int i = 0; i < N; ++i) {
        std::vector<double> U = trap;
        for (int j = 0; j < N; ++j)
          if (j != i)
            for (std::size_t x = 0; x < size; ++x) U[x] += Vh[j][x];
        const detail::GradientFlow flow(grid, std::move(U), 0.0);
        auto fr = flow.run(phi[i], opts);
        inner += fr.iterations;
        phi[i] = std::move(fr.phi);
        if (N > 1) Vh[i] = potential_of(phi[i]);
      }
      const double E_new = total(nullptr, nullptr, nullptr);
      change = E - E_new;
      E = E_new;
      r.history.push_back(E / N);
      if (N == 1 || std::abs(change) < opts.tol) {
        r.converged = true;
        ++sweep;
        break;
      }
    }
    double k = 0.0, t = 0.0, p = 0.0;
    E = total(&k, &t, &p);
    r.value = E / N;
    require(r.converged || !opts.strict, ErrorKind::NonConvergent,
            "Hartree sweeps did not settle within max_sweeps");
    r.residual = change;
    r.iterations = sweep;
    r.diagnostics = {{"kinetic", k / N}, {"trap", t / N}, {"pair", p / N}, {"inner_iterations", double(inner)}};
    std::vector<double> mean(size, 0.0);
    for (const auto& p_i : phi) {
      r.orbitals.push_back(detail::squared(grid, p_i));
      for (std::size_t x = 0; x < size; ++x) mean[x] += p_i[x] * p_i[x] / N;
    }
    r.minimizer = DensityField(grid, std::move(mean));
    return r;
  };

  VariationalResult best = run(detail::default_orbital(grid));
  best.restart_values.push_back(best.value);
  std::mt19937_64 eng(opts.seed);
  for (int r = 0; r < opts.restarts; ++r) {
    VariationalResult cand = run(detail::random_orbital(grid, eng));
    best.restart_values.push_back(cand.value);
    if (cand.value < best.value) {
      cand.restart_values = std::move(best.restart_values);
      best = std::move(cand);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

struct GateauxPoint {
  double t = 0.0;
  double difference_quotient = 0.0;  ///< (chi(f + t g) - chi(f)) / t
  double error = 0.0;                ///< |D(t) + <g, rho_f>|
};

struct GateauxReport {
  double base_value = 0.0;
  double predicted = 0.0;  ///< -<g, rho_f>
  std::vector<GateauxPoint> points;
  bool monotone = true;    ///< error strictly decreasing along t_list
};

inline GateauxReport gateaux_check(const GridFunction& f, const GridFunction& g, const TrapSpec& W, double alpha,
                                   double beta, const InitialDistribution& init, const GridSpec& grid,
                                   const VarOptions& opts, const std::vector<double>& t_list) {
  require(!t_list.empty(), ErrorKind::InvalidArgument, "t_list must be nonempty");
  for (std::size_t k = 0; k < t_list.size(); ++k) {
    require(t_list[k] > 0.0, ErrorKind::InvalidArgument, "t values must be positive");
    if (k) require(t_list[k] < t_list[k - 1], ErrorKind::InvalidArgument, "t_list must be decreasing");
  }
  require(g.grid() == grid, ErrorKind::GridMismatch, "direction g lives on a different grid");
  const VariationalResult base = solve_chi_otimes(f, W, alpha, beta, init, grid, opts);
  GateauxReport rep;
  rep.base_value = base.value;
  rep.predicted = -inner_product(g, base.minimizer);
  VarOptions warm = opts;
  warm.restarts = 0;
  warm.warm_start.assign(base.tilt.values().begin(), base.tilt.values().end());
  for (double t : t_list) {
    std::vector<double> ft(grid.size());
    for (std::size_t i = 0; i < ft.size(); ++i) ft[i] = f[i] + t * g[i];
    const auto r = solve_chi_otimes(GridFunction(grid, std::move(ft), FieldRole::tilt), W, alpha, beta, init, grid,
                                    warm);
    GateauxPoint p;
    p.t = t;
    p.difference_quotient = (r.value - base.value) / t;
    p.error = std::abs(p.difference_quotient - rep.predicted);
    if (!rep.points.empty() && !(p.error < rep.points.back().error)) rep.monotone = false;
    rep.points.push_back(p);
  }
  return rep;
}

}  // namespace hartree
