#pragma once

// J_beta(rho) = sup_f <f, rho> - Lambda_beta(f), approximated from below by
// ascent on the concave dual objective. The gradient of the objective is
// rho - rho_f in the weighted pairing; the ascent is L-BFGS with Armijo
// backtracking, restarted from steepest ascent when a search fails.

#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "hartree/error.hpp"
#include "hartree/feynman_kac.hpp"
#include "hartree/grid.hpp"
#include "hartree/paths.hpp"
#include "hartree/potentials.hpp"

namespace hartree {

struct RateFunctionResult {
  double value = 0.0;      ///< <f*, rho> - Lambda(f*), a certified lower bound
  GridFunction maximizer;  ///< f*, gauge-fixed to 0 at the density mode
  double gap = 0.0;        ///< ||rho - rho_{f*}||_1
  int iterations = 0;
  bool converged = false;
};

struct AscentOptions {
  double tol = 1e-4;
  int max_iter = 500;
  double dt_pde = 0.0;
  int memory = 8;
};

namespace detail {

inline void check_density_for_J(const DensityField& rho, const GridSpec& grid) {
  require(rho.grid() == grid, ErrorKind::GridMismatch, "density lives on a different grid");
  require(std::abs(quadrature(rho) - 1.0) <= 1e-6, ErrorKind::NotNormalized, "density must have mass 1");
}

struct DualPoint {
  std::vector<double> h;  ///< free part of the tilt (interior nodes move)
  double objective = 0.0; ///< <offset + h, rho> - Lambda(offset + h)
  std::vector<double> grad;  ///< rho - rho_f, zero on the boundary
  double gap = 0.0;
};

/// Maximises h -> <offset + h, rho> - Lambda(offset + h) over grid
/// functions h that vanish on the boundary.
inline RateFunctionResult dual_ascent(const DensityField& rho, std::span<const double> offset, double beta,
                                      const InitialDistribution& init, const GridSpec& grid,
                                      const AscentOptions& opt, std::span<const double> start = {}) {
  require(opt.tol > 0.0, ErrorKind::InvalidArgument, "ascent tolerance must be positive");
  require(opt.max_iter >= 0, ErrorKind::InvalidArgument, "max_iter must be >= 0");
  const std::size_t size = grid.size();
  const auto wts = grid.weights();
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < size; ++i) s += wts[i] * a[i] * b[i];
    return s;
  };

  auto evaluate = [&](std::vector<double> h) -> std::optional<DualPoint> {
    std::vector<double> f(size);
    for (std::size_t i = 0; i < size; ++i) f[i] = offset[i] + h[i];
    GridFunction tilt(grid, f, FieldRole::tilt);
    TiltedSolve ts;
    try {
      ts = cgf_with_tilted(tilt, beta, init, grid, opt.dt_pde);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NonPositiveMass) return std::nullopt;
      throw;
    }
    DualPoint p;
    p.objective = inner_product(tilt, rho) - ts.cgf;
    if (!std::isfinite(p.objective)) return std::nullopt;
    p.grad.assign(size, 0.0);
    for (std::size_t i = 0; i < size; ++i) {
      const double diff = rho[i] - ts.tilted[i];
      p.gap += wts[i] * std::abs(diff);
      if (!grid.on_boundary(i)) p.grad[i] = diff;
    }
    p.h = std::move(h);
    return p;
  };

  std::vector<double> h0(size, 0.0);
  if (!start.empty()) {
    require(start.size() == size, ErrorKind::GridMismatch, "warm start has the wrong size");
    for (std::size_t i = 0; i < size; ++i)
      if (!grid.on_boundary(i)) h0[i] = start[i];
  }
  auto first = evaluate(h0);
  require(first.has_value(), ErrorKind::NoProgress, "dual objective not finite at the starting tilt");
  DualPoint cur = std::move(*first);

  std::deque<std::vector<double>> S, Y;
  std::deque<double> RHO;
  int it = 0;
  bool converged = cur.gap <= opt.tol;
  while (!converged && it < opt.max_iter) {
    // Two-loop recursion for the ascent direction d = H grad.
    std::vector<double> d = cur.grad;
    std::vector<double> alpha(S.size());
    for (std::size_t k = S.size(); k-- > 0;) {
      alpha[k] = RHO[k] * dot(S[k], d);
      for (std::size_t i = 0; i < size; ++i) d[i] -= alpha[k] * Y[k][i];
    }
    double gamma;
    if (S.empty()) {
      double mx = 0.0;
      for (double g : cur.grad) mx = std::max(mx, std::abs(g));
      gamma = mx > 0.0 ? 1.0 / mx : 1.0;
    } else {
      gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
    }
    for (double& x : d) x *= gamma;
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double b = RHO[k] * dot(Y[k], d);
      for (std::size_t i = 0; i < size; ++i) d[i] += (alpha[k] - b) * S[k][i];
    }
    double slope = dot(cur.grad, d);
    if (!(slope > 0.0)) {
      S.clear(), Y.clear(), RHO.clear();
      d = cur.grad;
      double mx = 0.0;
      for (double g : d) mx = std::max(mx, std::abs(g));
      for (double& x : d) x /= mx;
      slope = dot(cur.grad, d);
    }

    std::optional<DualPoint> next;
    double step = 1.0;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      std::vector<double> h = cur.h;
      for (std::size_t i = 0; i < size; ++i) h[i] += step * d[i];
      auto trial = evaluate(std::move(h));
      if (trial && trial->objective >= cur.objective + 1e-4 * step * slope) {
        next = std::move(trial);
        break;
      }
    }
    if (!next) {
      if (S.empty()) {
        require(it > 0, ErrorKind::NoProgress, "line search failed on the first ascent step");
        break;
      }
      S.clear(), Y.clear(), RHO.clear();  // retry from steepest ascent
      continue;
    }
    std::vector<double> s(size), y(size);
    for (std::size_t i = 0; i < size; ++i) {
      s[i] = next->h[i] - cur.h[i];
      y[i] = cur.grad[i] - next->grad[i];  // curvature of the negated objective
    }
    const double sy = dot(s, y);
    if (sy > 1e-16 * std::sqrt(dot(s, s) * dot(y, y))) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      RHO.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opt.memory) S.pop_front(), Y.pop_front(), RHO.pop_front();
    }
    cur = std::move(*next);
    ++it;
    converged = cur.gap <= opt.tol;
  }

  // Gauge: the constant direction is null when rho sits in the interior;
  // report f* pinned to 0 at the density mode.
  std::size_t mode = 0;
  for (std::size_t i = 0; i < size; ++i)
    if (rho[i] > rho[mode]) mode = i;
  std::vector<double> fstar(size);
  for (std::size_t i = 0; i < size; ++i) fstar[i] = offset[i] + cur.h[i];
  const double pin = grid.on_boundary(mode) ? 0.0 : fstar[mode];
  for (std::size_t i = 0; i < size; ++i)
    if (!grid.on_boundary(i)) fstar[i] -= pin;

  RateFunctionResult r;
  r.value = cur.objective;
  r.maximizer = GridFunction(grid, std::move(fstar), FieldRole::tilt);
  r.gap = cur.gap;
  r.iterations = it;
  r.converged = converged;
  return r;
}

}  // namespace detail

/// Certified lower bound on J_beta(rho) from dual ascent, starting at f = 0
/// or at `warm` (interior values are used).
inline RateFunctionResult evaluate_J(const DensityField& rho, double beta, const InitialDistribution& init,
                                     const GridSpec& grid, double tol = 1e-4, int max_iter = 500,
                                     double dt_pde = 0.0, const GridFunction* warm = nullptr) {
  detail::check_density_for_J(rho, grid);
  const std::vector<double> zero(grid.size(), 0.0);
  AscentOptions opt{tol, max_iter, dt_pde};
  return detail::dual_ascent(rho, zero, beta, init, grid, opt,
                             warm ? warm->values() : std::span<const double>{});
}

namespace detail {
inline void check_trap_pairing(const DensityField& rho, const TrapSpec& W) {
  const GridSpec& g = rho.grid();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (rho[i] > 0.0)
      require(std::isfinite(eval_trap(W, g.node(i), g.dim())), ErrorKind::InvalidArgument,
              "<W, rho> is infinite: density charges the hard wall");
}
}  // namespace detail

/// <-W + h, rho> - Lambda(-W + h) for a nonpositive tilt h.
inline double j_lower_bound(const DensityField& rho, const GridFunction& h, const TrapSpec& W, double beta,
                            const InitialDistribution& init, const GridSpec& grid, double dt_pde = 0.0) {
  require(rho.grid() == grid && h.grid() == grid, ErrorKind::GridMismatch, "fields live on different grids");
  for (double x : h.values()) require(x <= 0.0, ErrorKind::PositiveTilt, "tilt h must be nonpositive");
  detail::check_trap_pairing(rho, W);
  const GridFunction offset = trap_tilt(W, grid);
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = offset[i] + h[i];
  const GridFunction tilt(grid, std::move(f), FieldRole::tilt);
  return inner_product(tilt, rho) - cgf(tilt, beta, init, grid, dt_pde);
}

struct AlternateExpression {
  double sup_over_shifted = 0.0;  ///< sup over -W + h
  double plain = 0.0;             ///< sup over f
  RateFunctionResult shifted_result;
  RateFunctionResult plain_result;
};

/// Runs the dual ascent in both parametrisations, f and -W + h.
inline AlternateExpression alternate_expression_check(const DensityField& rho, const TrapSpec& W, double beta,
                                                      const InitialDistribution& init, const GridSpec& grid,
                                                      double tol = 1e-4, int max_iter = 500,
                                                      double dt_pde = 0.0) {
  detail::check_density_for_J(rho, grid);
  detail::check_trap_pairing(rho, W);
  AscentOptions opt{tol, max_iter, dt_pde};
  const GridFunction offset = trap_tilt(W, grid);
  AlternateExpression out;
  out.shifted_result = detail::dual_ascent(rho, offset.values(), beta, init, grid, opt);
  out.plain_result = evaluate_J(rho, beta, init, grid, tol, max_iter, dt_pde);
  out.sup_over_shifted = out.shifted_result.value;
  out.plain = out.plain_result.value;
  return out;
}

}  // namespace hartree
