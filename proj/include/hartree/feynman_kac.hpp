#pragma once

// Feynman-Kac evaluation of the cumulant generating functional
//
//   Lambda_beta(f) = (1/beta) log E[ exp( int_0^beta f(B_s) ds ) ]
//
// by solving d_s u = Delta u + f u on the grid box with zero Dirichlet
// data, and of the tilted occupation density (the functional gradient of
// Lambda_beta). Time stepping is Strang splitting S = E H E with
// E = exp(dt f / 2) and H a Crank-Nicolson heat step applied axis by axis.
// S is symmetric, so the backward (adjoint) solution is a forward solve
// started from the constant 1, and the tilted density below is the exact
// gradient of the discrete Lambda.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hartree/error.hpp"
#include "hartree/grid.hpp"
#include "hartree/parallel.hpp"
#include "hartree/paths.hpp"

namespace hartree {

/// Largest admissible PDE time step h^2 / (4 d).
inline double max_pde_step(const GridSpec& grid) {
  return grid.spacing() * grid.spacing() / (4.0 * grid.dim());
}

namespace detail {

/// Crank-Nicolson heat step on interior nodes, one tridiagonal solve per
/// grid line and axis. Boundary nodes stay zero.
class HeatStepper {
 public:
  HeatStepper(const GridSpec& grid, double dt) : grid_(grid) {
    const int n = grid.points_per_axis();
    const double h = grid.spacing();
    lambda_ = 0.5 * dt / (h * h);
    // Thomas factorisation of tridiag(-l, 1+2l, -l) of size n-2.
    const int m = n - 2;
    cprime_.assign(static_cast<std::size_t>(m), 0.0);
    denom_.assign(static_cast<std::size_t>(m), 0.0);
    const double a = -lambda_, b = 1.0 + 2.0 * lambda_;
    double prev = 0.0;
    for (int i = 0; i < m; ++i) {
      const double d = b - a * prev;
      denom_[i] = d;
      prev = (i + 1 < m) ? a / d : 0.0;
      cprime_[i] = prev;
    }
    line_.assign(static_cast<std::size_t>(m), 0.0);
  }

  void apply(std::vector<double>& u) {
    for (int axis = 0; axis < grid_.dim(); ++axis) sweep(u, axis);
  }

 private:
  void sweep(std::vector<double>& u, int axis) {
    const int n = grid_.points_per_axis();
    const int dim = grid_.dim();
    const std::size_t stride = grid_.stride(axis);
    // Enumerate line starts: interior indices on the other axes.
    Index idx{0, 0, 0};
    int others[2] = {0, 0};
    int no = 0;
    for (int a = 0; a < dim; ++a)
      if (a != axis) others[no++] = a;
    const int r0 = no > 0 ? n - 2 : 1;
    const int r1 = no > 1 ? n - 2 : 1;
    for (int p = 0; p < r0; ++p)
      for (int q = 0; q < r1; ++q) {
        if (no > 0) idx[others[0]] = p + 1;
        if (no > 1) idx[others[1]] = q + 1;
        idx[axis] = 0;
        solve_line(u.data() + grid_.flatten(idx), stride, n);
      }
  }

  void solve_line(double* base, std::size_t stride, int n) {
    const int m = n - 2;
    const double l = lambda_;
    const double a = -l;
    // rhs = (I + l T) x with zero boundary values.
    for (int i = 0; i < m; ++i) {
      const double left = i > 0 ? base[stride * i] : 0.0;
      const double mid = base[stride * (i + 1)];
      const double right = i + 1 < m ? base[stride * (i + 2)] : 0.0;
      line_[i] = mid + l * (left - 2.0 * mid + right);
    }
    // Forward elimination and back substitution.
    double prev = 0.0;
    for (int i = 0; i < m; ++i) {
      prev = (line_[i] - a * prev) / denom_[i];
      line_[i] = prev;
    }
    for (int i = m - 2; i >= 0; --i) line_[i] -= cprime_[i] * line_[i + 1];
    for (int i = 0; i < m; ++i) base[stride * (i + 1)] = line_[i];
  }

  GridSpec grid_;
  double lambda_ = 0.0;
  std::vector<double> cprime_, denom_, line_;
};

struct TimeGrid {
  int steps = 0;
  double dt = 0.0;
};

inline TimeGrid pde_time_grid(const GridSpec& grid, double beta, double dt_pde) {
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "beta must be positive");
  const double limit = max_pde_step(grid);
  if (dt_pde <= 0.0) dt_pde = limit;
  require(dt_pde <= limit * (1.0 + 1e-12), ErrorKind::UnstableStep,
          "PDE time step exceeds h^2/(4 d)");
  const int steps = std::max(1, static_cast<int>(std::ceil(beta / dt_pde - 1e-9)));
  return {steps, beta / steps};
}

inline void check_tilt(const GridFunction& f, const GridSpec& grid) {
  require(f.grid() == grid, ErrorKind::GridMismatch, "tilt lives on a different grid");
  for (double v : f.values())
    require(std::isfinite(v), ErrorKind::NonFiniteValue, "tilt must be finite (use the hard-wall floor)");
  require(grid.points_per_axis() >= 3, ErrorKind::InvalidResolution, "grid too small for the PDE");
}

/// Forward propagation u <- E H E u with per-step renormalisation.
class Propagator {
 public:
  Propagator(const GridFunction& f, const GridSpec& grid, TimeGrid tg)
      : grid_(grid), heat_(grid, tg.dt), half_(grid.size(), 0.0) {
    for (std::size_t i = 0; i < half_.size(); ++i)
      half_[i] = grid.on_boundary(i) ? 0.0 : std::exp(0.5 * tg.dt * f[i]);
  }

  /// One step; returns log of the renormalisation factor applied.
  double step(std::vector<double>& u) {
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= half_[i];
    heat_.apply(u);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] *= half_[i];
      s += u[i];
    }
    require(s > 0.0 && std::isfinite(s), ErrorKind::NonPositiveMass, "Feynman-Kac mass vanished or overflowed");
    const double inv = 1.0 / s;
    for (double& x : u) x *= inv;
    return std::log(s);
  }

 private:
  GridSpec grid_;
  HeatStepper heat_;
  std::vector<double> half_;
};

/// Initial data with zero Dirichlet values, scaled to unit sum; returns
/// log of the removed scale (log of h^d times the interior node sum of the
/// density, i.e. log of its interior mass).
inline double initial_state(const InitialDistribution& init, const GridSpec& grid, std::vector<double>& u) {
  const DensityField rho0 = init.density(grid);
  u.assign(grid.size(), 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (grid.on_boundary(i)) continue;
    u[i] = rho0[i];
    s += u[i];
  }
  require(s > 0.0, ErrorKind::NonPositiveMass, "initial law has no interior mass");
  for (double& x : u) x /= s;
  return std::log(s * grid.cell_volume());
}

}  // namespace detail

/// Result of a forward Feynman-Kac solve. `terminal` holds u(beta, .)
/// scaled to unit node sum; the true field is terminal * exp(log_scale).
struct FkSolution {
  GridSpec grid;
  double dt_pde = 0.0;
  int steps = 0;
  std::vector<double> terminal;
  double log_scale = 0.0;
  double Z = 0.0;      ///< quadrature of u(beta, .)
  double log_Z = 0.0;  ///< log Z, finite even when Z under/overflows
  /// Stored slices u(k*dt) (unit node sum) with their log scales, every
  /// `slice_every` steps when requested.
  std::vector<std::vector<double>> slices;
  std::vector<double> slice_log_scales;
};

/// Solves d_s u = Delta u + f u, u(0) = density of `init`. dt_pde <= 0
/// selects the largest admissible step. Throws UnstableStep,
/// NonPositiveMass, NonFiniteValue.
inline FkSolution solve_forward(const GridFunction& f, double beta, const InitialDistribution& init,
                                const GridSpec& grid, double dt_pde = 0.0, int slice_every = 0) {
  detail::check_tilt(f, grid);
  const auto tg = detail::pde_time_grid(grid, beta, dt_pde);
  detail::Propagator prop(f, grid, tg);
  FkSolution sol;
  sol.grid = grid;
  sol.dt_pde = tg.dt;
  sol.steps = tg.steps;
  std::vector<double> u;
  double log_scale = detail::initial_state(init, grid, u);
  auto keep = [&](int k) {
    if (slice_every > 0 && k % slice_every == 0) {
      sol.slices.push_back(u);
      sol.slice_log_scales.push_back(log_scale);
    }
  };
  keep(0);
  for (int k = 1; k <= tg.steps; ++k) {
    log_scale += prop.step(u);
    keep(k);
  }
  // u has unit node sum here, so Z = exp(log_scale) exactly.
  sol.terminal = std::move(u);
  sol.log_scale = log_scale;
  sol.log_Z = log_scale;
  sol.Z = std::exp(log_scale);
  return sol;
}

/// Lambda_beta(f) = (1/beta) log quadrature(u(beta, .)).
inline double cgf(const GridFunction& f, double beta, const InitialDistribution& init, const GridSpec& grid,
                  double dt_pde = 0.0) {
  return solve_forward(f, beta, init, grid, dt_pde).log_Z / beta;
}

/// Lambda_beta(f) together with its gradient density rho_f.
struct TiltedSolve {
  double cgf = 0.0;
  DensityField tilted;
};

/// rho_f(x) = (1/beta) int_0^beta u(s,x) w(s,x) ds / Z with w the backward
/// solution from w(beta) = 1, discretised with trapezoid weights in time;
/// its quadrature mass is 1 by construction.
inline TiltedSolve cgf_with_tilted(const GridFunction& f, double beta, const InitialDistribution& init,
                                   const GridSpec& grid, double dt_pde = 0.0) {
  detail::check_tilt(f, grid);
  const auto tg = detail::pde_time_grid(grid, beta, dt_pde);
  detail::Propagator prop(f, grid, tg);
  const std::size_t size = grid.size();

  // Backward fields w(beta - j dt) = S^j 1, stored with unit node sum.
  std::vector<std::vector<double>> back(static_cast<std::size_t>(tg.steps) + 1);
  std::vector<double> w(size, 0.0);
  double wsum = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    if (!grid.on_boundary(i)) {
      w[i] = 1.0;
      wsum += 1.0;
    }
  for (double& x : w) x /= wsum;
  back[0] = w;
  for (int j = 1; j <= tg.steps; ++j) {
    prop.step(w);
    back[j] = w;
  }

  std::vector<double> u;
  double log_scale = detail::initial_state(init, grid, u);
  const auto tau = time_weights(tg.steps, tg.dt);
  std::vector<double> rho(size, 0.0);
  auto accumulate = [&](int k) {
    const auto& b = back[static_cast<std::size_t>(tg.steps - k)];
    double pairing = 0.0;
    for (std::size_t i = 0; i < size; ++i) pairing += u[i] * b[i];
    require(pairing > 1e-280, ErrorKind::NonPositiveMass, "forward and backward fields do not overlap");
    const double scale = tau[k] / (beta * pairing * grid.cell_volume());
    for (std::size_t i = 0; i < size; ++i) rho[i] += scale * u[i] * b[i];
  };
  accumulate(0);
  for (int k = 1; k <= tg.steps; ++k) {
    log_scale += prop.step(u);
    accumulate(k);
  }
  return TiltedSolve{log_scale / beta, DensityField(grid, std::move(rho))};
}

inline DensityField tilted_occupation(const GridFunction& f, double beta, const InitialDistribution& init,
                                      const GridSpec& grid, double dt_pde = 0.0) {
  return cgf_with_tilted(f, beta, init, grid, dt_pde).tilted;
}

/// 1 - (mass at time beta) for f = 0: the Dirichlet leakage of the box.
inline double boundary_leakage(double beta, const InitialDistribution& init, const GridSpec& grid,
                               double dt_pde = 0.0) {
  return 1.0 - solve_forward(GridFunction::constant(grid, 0.0, FieldRole::tilt), beta, init, grid, dt_pde).Z;
}

struct McValue {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Log-mean-exp of log-weights with delta-method standard error of the
/// log: se = sd(w) / (sqrt(M) mean(w)).
inline McValue log_mean_exp(std::span<const double> logw) {
  require(!logw.empty(), ErrorKind::InvalidArgument, "empty sample");
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logw) mx = std::max(mx, l);
  require(std::isfinite(mx), ErrorKind::AllWeightsZero, "every sample has zero weight");
  const double M = static_cast<double>(logw.size());
  double s = 0.0, s2 = 0.0;
  for (double l : logw) {
    const double e = std::exp(l - mx);
    s += e;
    s2 += e * e;
  }
  const double mean = s / M;
  const double var = logw.size() > 1 ? std::max(0.0, (s2 - M * mean * mean) / (M - 1.0)) : 0.0;
  return McValue{mx + std::log(mean), std::sqrt(var / M) / mean};
}

/// Monte Carlo estimate of Lambda_beta(f) from M independent paths, with f
/// read at the cell containing each time node (the cgf grid convention).
inline McValue cgf_mc(const GridFunction& f, double beta, const InitialDistribution& init, int M, double dt,
                      std::uint64_t seed) {
  require(M >= 100, ErrorKind::InvalidArgument, "cgf_mc needs M >= 100 replicas");
  const GridSpec& grid = f.grid();
  const int dim = grid.dim();
  const int steps = time_steps(beta, dt);
  const double dt_eff = beta / steps;
  const auto tw = time_weights(steps, dt_eff);
  std::vector<double> logw(static_cast<std::size_t>(M));
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t r) {
    std::vector<double> path(static_cast<std::size_t>(steps + 1) * dim);
    detail::generate_path(path, steps, dim, dt_eff, init, seed, r, 0);
    double l = 0.0;
    for (int k = 0; k <= steps; ++k) {
      Point x{0.0, 0.0, 0.0};
      for (int a = 0; a < dim; ++a) x[a] = path[static_cast<std::size_t>(k) * dim + a];
      bool clipped = false;
      l += tw[k] * f[grid.locate(x, clipped)];
    }
    logw[r] = l;
  });
  McValue v = log_mean_exp(logw);
  v.estimate /= beta;
  v.std_error /= beta;
  return v;
}

}  // namespace hartree
