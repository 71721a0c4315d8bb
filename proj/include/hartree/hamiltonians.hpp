#pragma once

// Trap and pair Hamiltonians of a path ensemble, grid intersection local
// times of path pairs, and their mollified value at zero.

#include <cmath>
#include <limits>
#include <vector>

#include "hartree/error.hpp"
#include "hartree/grid.hpp"
#include "hartree/paths.hpp"
#include "hartree/potentials.hpp"

namespace hartree {

/// H = sum_i sum_k w_k W(X^i_k); +inf once any path touches a hard wall.
inline double trap_energy(const PathEnsemble& ens, const TrapSpec& trap) {
  const auto tw = ens.weights();
  double total = 0.0;
  for (int i = 0; i < ens.N(); ++i) {
    double path_sum = 0.0;
    for (int k = 0; k <= ens.steps(); ++k) {
      const double w = eval_trap(trap, ens.position(i, k), ens.dim());
      if (!std::isfinite(w)) return kHardWall;
      path_sum += tw[k] * w;
    }
    total += path_sum;
  }
  return total;
}

namespace detail {

/// Coarsened trapezoid weights using every stride-th time node.
inline std::vector<double> strided_weights(const PathEnsemble& ens, int stride) {
  require(stride >= 1 && ens.steps() % stride == 0, ErrorKind::InvalidArgument,
          "stride must divide the number of time steps");
  return time_weights(ens.steps() / stride, ens.dt() * stride);
}

/// (1/beta) sum_{k,l} w_k w_l v(|X^i_k - X^j_l|) for one ordered pair.
template <RadialPotential V>
double pair_double_sum(const PathEnsemble& ens, int i, int j, const V& v, std::span<const double> tw, int stride) {
  const int dim = ens.dim();
  const int nt = static_cast<int>(tw.size());
  const double reach2 = v.support_radius() * v.support_radius();
  double s = 0.0;
  for (int k = 0; k < nt; ++k) {
    const double* x = ens.raw(i, k * stride);
    double row = 0.0;
    for (int l = 0; l < nt; ++l) {
      const double* y = ens.raw(j, l * stride);
      double r2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double d = x[a] - y[a];
        r2 += d * d;
      }
      if (r2 > reach2) continue;
      row += tw[l] * v(std::sqrt(r2));
    }
    s += tw[k] * row;
  }
  return s / ens.beta();
}

}  // namespace detail

/// K = sum_{i<j} (1/beta) sum_{k,l} w_k w_l v(|X^i_k - X^j_l|), evaluated
/// on every stride-th time node. Works for any radial potential, including
/// the rescaled v_N. Pairs are summed in fixed index order.
template <RadialPotential V>
double pair_energy(const PathEnsemble& ens, const V& v, int stride = 1) {
  require(ens.N() >= 2, ErrorKind::InvalidArgument, "pair energy needs N >= 2");
  const auto tw = detail::strided_weights(ens, stride);
  double total = 0.0;
  for (int i = 0; i < ens.N(); ++i)
    for (int j = i + 1; j < ens.N(); ++j) total += detail::pair_double_sum(ens, i, j, v, tw, stride);
  return total;
}

/// K^(N) = (1/N) sum_{i<j} (1/beta) sum_{k,l} w_k w_l N^d v(N|X^i_k - X^j_l|),
/// which is the pair energy of the rescaled potential v_N.
/// Throws UnsupportedDimension for d = 1.
inline double scaled_pair_energy(const PathEnsemble& ens, const PairSpec& v, int stride = 1) {
  require(ens.dim() == 2 || ens.dim() == 3, ErrorKind::UnsupportedDimension,
          "the rescaled pair energy is defined for d = 2, 3 only");
  return pair_energy(ens, rescale_pair(v, ens.N()), stride);
}

struct StrideReport {
  int stride = 1;
  double fine = 0.0;    ///< energy at the requested stride
  double coarse = 0.0;  ///< energy at twice the stride
  /// First-order Richardson estimate of the bias of `fine` relative to the
  /// full double sum: fine - coarse.
  double bias_estimate = 0.0;
};

inline StrideReport scaled_pair_energy_stride_report(const PathEnsemble& ens, const PairSpec& v, int stride) {
  StrideReport r;
  r.stride = stride;
  r.fine = scaled_pair_energy(ens, v, stride);
  r.coarse = scaled_pair_energy(ens, v, 2 * stride);
  r.bias_estimate = r.fine - r.coarse;
  return r;
}

/// Smooth bump kappa(x) ~ exp(-1/(1-|x/eps|^2)) on a kernel grid with the
/// host spacing, normalised to unit quadrature mass.
struct Mollifier {
  double epsilon = 0.0;
  GridFunction kernel;

  double sup_norm() const {
    double m = 0.0;
    for (double v : kernel.values()) m = std::max(m, v);
    return m;
  }
};

/// Throws MollifierUnderResolved if eps < 2h.
inline Mollifier make_mollifier(double epsilon, const GridSpec& host) {
  const double h = host.spacing();
  require(epsilon >= 2.0 * h * (1.0 - 1e-12), ErrorKind::MollifierUnderResolved,
          "mollifier width must be at least two grid spacings");
  const int m = static_cast<int>(std::ceil(epsilon / h - 1e-9));
  const GridSpec k = GridSpec::kernel(host.dim(), h, m);
  std::vector<double> v(k.size());
  double mass = 0.0;
  for (std::size_t o = 0; o < v.size(); ++o) {
    const double s = norm2(k.node(o), k.dim()) / (epsilon * epsilon);
    v[o] = s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
    mass += k.weight(o) * v[o];
  }
  for (double& x : v) x /= mass;
  return Mollifier{epsilon, GridFunction(k, std::move(v), FieldRole::field)};
}

/// Grid intersection local time of a path pair: density of the lattice
/// differences between the cells of X^i_k and X^j_l with mass w_k w_l/beta^2.
struct IltField {
  DensityField density;
  int i = 0;
  int j = 0;
  std::uint64_t seed = 0;
  std::size_t clipped = 0;
};

namespace detail {

inline void check_ilt_args(const PathEnsemble& ens, int i, int j, const GridSpec& grid) {
  require(i >= 0 && i < ens.N() && j >= 0 && j < ens.N(), ErrorKind::IndexOutOfRange, "path index out of range");
  require(grid.dim() == ens.dim(), ErrorKind::GridMismatch, "grid and ensemble dimensions differ");
  require(grid.has_center_node(), ErrorKind::GridMismatch, "intersection grids need an odd node count");
}

/// Lattice coordinate round(x/h) of each time node of a path.
inline std::vector<Index> lattice_path(const PathEnsemble& ens, int path, double h) {
  std::vector<Index> out(static_cast<std::size_t>(ens.steps()) + 1, Index{0, 0, 0});
  for (int k = 0; k <= ens.steps(); ++k) {
    const double* x = ens.raw(path, k);
    for (int a = 0; a < ens.dim(); ++a) out[k][a] = static_cast<int>(std::nearbyint(x[a] / h));
  }
  return out;
}

}  // namespace detail

/// Throws IndexOutOfRange, UnsupportedDimension (d = 1) or GridMismatch.
inline IltField ilt_grid(const PathEnsemble& ens, int i, int j, const GridSpec& grid) {
  require(ens.dim() == 2 || ens.dim() == 3, ErrorKind::UnsupportedDimension,
          "intersection local times are defined for d = 2, 3 only");
  require(i != j, ErrorKind::InvalidArgument, "intersection local time needs two distinct paths");
  detail::check_ilt_args(ens, i, j, grid);
  const double h = grid.spacing();
  const int c = grid.center_index();
  const int n = grid.points_per_axis();
  const auto xi = detail::lattice_path(ens, i, h);
  const auto xj = detail::lattice_path(ens, j, h);
  const auto tw = ens.weights();
  const double b2 = ens.beta() * ens.beta();
  std::vector<double> acc(grid.size(), 0.0);
  std::size_t clipped = 0;
  for (std::size_t k = 0; k < xi.size(); ++k)
    for (std::size_t l = 0; l < xj.size(); ++l) {
      Index z{0, 0, 0};
      bool clip = false;
      for (int a = 0; a < ens.dim(); ++a) {
        int t = xi[k][a] - xj[l][a] + c;
        if (t < 0 || t >= n) {
          clip = true;
          t = std::clamp(t, 0, n - 1);
        }
        z[a] = t;
      }
      if (clip) ++clipped;
      const std::size_t node = grid.flatten(z);
      acc[node] += tw[k] * tw[l] / b2 / grid.weight(node);
    }
  return IltField{DensityField(grid, std::move(acc)), i, j, ens.seed(), clipped};
}

/// Grid with the same spacing and twice the half-width; holds every
/// difference of two positions from the original box.
inline GridSpec difference_grid(const GridSpec& grid) {
  return GridSpec::make(grid.dim(), 2.0 * grid.half_width(), 2 * grid.points_per_axis() - 1);
}

/// <mu^i * kappa_eps, mu^j * kappa_eps>, the mollified intersection local
/// time at zero. i == j is accepted (the diagonal self-pairing, bounded by
/// the sup norm of kappa_eps). Throws MollifierUnderResolved if eps < 2h.
inline double mollified_ilt_zero(const PathEnsemble& ens, int i, int j, double epsilon, const GridSpec& grid) {
  detail::check_ilt_args(ens, i, j, grid);
  const Mollifier kappa = make_mollifier(epsilon, grid);
  const auto mi = occupation_measure(ens, i, grid);
  const auto mj = occupation_measure(ens, j, grid);
  const GridFunction si = convolve(mi.density, kappa.kernel);
  const GridFunction sj = convolve(mj.density, kappa.kernel);
  return inner_product(si, sj);
}

/// Same quantity computed in the other order: the grid intersection local
/// time paired with (kappa_eps * kappa_eps)(-z).
inline double mollified_ilt_zero_swapped(const PathEnsemble& ens, int i, int j, double epsilon,
                                         const GridSpec& grid) {
  const Mollifier kappa = make_mollifier(epsilon, grid);
  const GridSpec dgrid = difference_grid(grid);
  const IltField L = ilt_grid(ens, i, j, dgrid);

  const GridSpec& kg = kappa.kernel.grid();
  const int m = kg.center_index();
  const GridSpec wide = GridSpec::kernel(kg.dim(), kg.spacing(), 2 * m);
  std::vector<double> embedded(wide.size(), 0.0);
  for (std::size_t o = 0; o < kg.size(); ++o) {
    Index idx = kg.unflatten(o);
    for (int a = 0; a < kg.dim(); ++a) idx[a] += m;
    embedded[wide.flatten(idx)] = kappa.kernel[o];
  }
  const GridFunction auto_corr =
      convolve(GridFunction(wide, std::move(embedded)), kappa.kernel, ConvolutionMethod::direct);

  const int wm = wide.center_index();
  const int dc = dgrid.center_index();
  double s = 0.0;
  for (std::size_t o = 0; o < wide.size(); ++o) {
    const Index oo = wide.unflatten(o);
    Index z{0, 0, 0}, neg{0, 0, 0};
    for (int a = 0; a < wide.dim(); ++a) {
      z[a] = dc + (oo[a] - wm);
      neg[a] = wm - (oo[a] - wm);
    }
    const std::size_t node = dgrid.flatten(z);
    s += dgrid.weight(node) * L.density[node] * auto_corr[wide.flatten(neg)];
  }
  return s;
}

struct HeuristicBridge {
  double direct = 0.0;   ///< scaled_pair_energy
  double via_ilt = 0.0;  ///< N beta * int v(x) (1/N^2) sum_{i<j} L_ij(x/N) dx on the grid
  double relative_difference = 0.0;
};

/// Diagnostic comparison of the rescaled pair energy with its intersection
/// local time representation. Under-resolved when range/N is below h.
inline HeuristicBridge heuristic_bridge(const PathEnsemble& ens, const PairSpec& v, const GridSpec& grid) {
  HeuristicBridge b;
  b.direct = scaled_pair_energy(ens, v);
  const GridSpec dgrid = difference_grid(grid);
  const double N = ens.N();
  const double Nd = std::pow(N, ens.dim());
  std::vector<double> vN(dgrid.size());
  for (std::size_t z = 0; z < vN.size(); ++z) vN[z] = v(N * std::sqrt(norm2(dgrid.node(z), dgrid.dim())));
  const GridFunction vfield(dgrid, std::move(vN));
  double pairs = 0.0;
  for (int i = 0; i < ens.N(); ++i)
    for (int j = i + 1; j < ens.N(); ++j) pairs += inner_product(ilt_grid(ens, i, j, dgrid).density, vfield);
  b.via_ilt = N * ens.beta() * Nd * pairs / (N * N);
  b.relative_difference = b.direct != 0.0 ? std::abs(b.via_ilt - b.direct) / std::abs(b.direct) : 0.0;
  return b;
}

}  // namespace hartree
