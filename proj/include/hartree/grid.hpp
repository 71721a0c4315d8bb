#pragma once

// Cubic spatial grids on [-R, R]^d, nodal grid functions, trapezoid
// quadrature and discrete convolution.
//
// Layout: node values are stored row-major over axes, axis 0 slowest, each
// axis in increasing coordinate order.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "hartree/error.hpp"

namespace hartree {

/// A point in R^d. Components beyond the grid dimension are zero.
using Point = std::array<double, 3>;
using Index = std::array<int, 3>;

inline double norm2(const Point& x, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) s += x[a] * x[a];
  return s;
}

class GridSpec {
 public:
  GridSpec() = default;

  /// Validated factory; see make_grid.
  static GridSpec make(int dim, double half_width, int points_per_axis) {
    require(dim >= 1 && dim <= 3, ErrorKind::InvalidDimension,
            "grid dimension must be 1, 2 or 3, got " + std::to_string(dim));
    require(std::isfinite(half_width) && half_width > 0.0, ErrorKind::InvalidResolution,
            "grid half-width must be positive");
    require(points_per_axis >= 8, ErrorKind::InvalidResolution,
            "grid needs at least 8 points per axis, got " + std::to_string(points_per_axis));
    return GridSpec(dim, half_width, points_per_axis);
  }

  /// Small odd grid of 2m+1 nodes per axis centred on the origin with the
  /// given spacing. Used for convolution kernels, which may be narrower than
  /// the 8-point minimum of computational grids.
  static GridSpec kernel(int dim, double spacing, int half_nodes) {
    require(dim >= 1 && dim <= 3, ErrorKind::InvalidDimension, "kernel dimension must be 1..3");
    require(spacing > 0.0 && half_nodes >= 1, ErrorKind::InvalidResolution,
            "kernel grid needs positive spacing and at least one node per side");
    GridSpec g(dim, spacing * half_nodes, 2 * half_nodes + 1);
    g.spacing_ = spacing;
    return g;
  }

  int dim() const { return dim_; }
  double half_width() const { return half_width_; }
  int points_per_axis() const { return n_; }
  double spacing() const { return spacing_; }

  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
    return s;
  }

  /// Coordinate of node i along any axis; exactly antisymmetric in i.
  double coordinate(int i) const {
    const int m = n_ - 1;
    return half_width_ * static_cast<double>(2 * i - m) / static_cast<double>(m);
  }

  /// Row-major stride of an axis (axis 0 slowest).
  std::size_t stride(int axis) const {
    std::size_t s = 1;
    for (int a = axis + 1; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
    return s;
  }

  Index unflatten(std::size_t flat) const {
    Index idx{0, 0, 0};
    for (int a = dim_ - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(flat % static_cast<std::size_t>(n_));
      flat /= static_cast<std::size_t>(n_);
    }
    return idx;
  }

  std::size_t flatten(const Index& idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim_; ++a) flat = flat * static_cast<std::size_t>(n_) + static_cast<std::size_t>(idx[a]);
    return flat;
  }

  Point node(std::size_t flat) const {
    const Index idx = unflatten(flat);
    Point x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) x[a] = coordinate(idx[a]);
    return x;
  }

  /// One-dimensional trapezoid weight of node i.
  double axis_weight(int i) const {
    return (i == 0 || i == n_ - 1) ? 0.5 * spacing_ : spacing_;
  }

  /// Tensor-product trapezoid weight of a node.
  double weight(std::size_t flat) const {
    const Index idx = unflatten(flat);
    double w = 1.0;
    for (int a = 0; a < dim_; ++a) w *= axis_weight(idx[a]);
    return w;
  }

  std::vector<double> weights() const {
    std::vector<double> w(size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = weight(i);
    return w;
  }

  bool on_boundary(std::size_t flat) const {
    const Index idx = unflatten(flat);
    for (int a = 0; a < dim_; ++a)
      if (idx[a] == 0 || idx[a] == n_ - 1) return true;
    return false;
  }

  /// Cell volume h^d of an interior node.
  double cell_volume() const { return std::pow(spacing_, dim_); }

  bool has_center_node() const { return n_ % 2 == 1; }
  int center_index() const { return (n_ - 1) / 2; }

  /// Index of the node whose cell contains x along one axis; positions
  /// outside the box snap to the nearest boundary node and set `clipped`.
  int nearest_index(double x, bool& clipped) const {
    double t = has_center_node() ? std::nearbyint(x / spacing_) + center_index()
                                 : std::floor((x + half_width_) / spacing_ + 0.5);
    if (t < 0.0) {
      clipped = true;
      return 0;
    }
    if (t > n_ - 1) {
      clipped = true;
      return n_ - 1;
    }
    return static_cast<int>(t);
  }

  /// Flat index of the cell containing a point (with boundary clipping).
  std::size_t locate(const Point& x, bool& clipped) const {
    Index idx{0, 0, 0};
    for (int a = 0; a < dim_; ++a) idx[a] = nearest_index(x[a], clipped);
    return flatten(idx);
  }

  bool same_layout(const GridSpec& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && half_width_ == o.half_width_;
  }

  bool same_spacing(const GridSpec& o) const {
    return dim_ == o.dim_ && std::abs(spacing_ - o.spacing_) <= 1e-12 * spacing_;
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) { return a.same_layout(b); }

 private:
  GridSpec(int dim, double half_width, int n)
      : dim_(dim), half_width_(half_width), n_(n), spacing_(2.0 * half_width / (n - 1)) {}

  int dim_ = 1;
  double half_width_ = 1.0;
  int n_ = 8;
  double spacing_ = 2.0 / 7.0;
};

/// Builds a cubic grid; spacing h = 2R/(n-1). Throws InvalidDimension or
/// InvalidResolution.
inline GridSpec make_grid(int dim, double half_width, int points_per_axis) {
  return GridSpec::make(dim, half_width, points_per_axis);
}

enum class FieldRole { density, potential, tilt, field };

inline std::string_view to_string(FieldRole r) {
  switch (r) {
    case FieldRole::density: return "density";
    case FieldRole::potential: return "potential";
    case FieldRole::tilt: return "tilt";
    case FieldRole::field: return "field";
  }
  return "field";
}

/// Real-valued nodal function. Potentials may hold +inf (hard walls);
/// density and tilt roles must be finite everywhere.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(GridSpec grid, std::vector<double> values, FieldRole role = FieldRole::field)
      : grid_(grid), values_(std::move(values)), role_(role) {
    require(values_.size() == grid_.size(), ErrorKind::GridMismatch,
            "value count does not match grid node count");
    if (role_ == FieldRole::density || role_ == FieldRole::tilt) {
      for (double v : values_)
        require(std::isfinite(v), ErrorKind::NonFiniteValue, "density/tilt fields must be finite");
    }
  }

  static GridFunction constant(const GridSpec& grid, double value, FieldRole role = FieldRole::field) {
    return GridFunction(grid, std::vector<double>(grid.size(), value), role);
  }

  template <typename Fn>
    requires std::invocable<Fn, const Point&>
  static GridFunction sample(const GridSpec& grid, Fn&& fn, FieldRole role = FieldRole::field) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid.node(i));
    return GridFunction(grid, std::move(v), role);
  }

  const GridSpec& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }
  FieldRole role() const { return role_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  GridSpec grid_;
  std::vector<double> values_;
  FieldRole role_ = FieldRole::field;
};

/// Nonnegative nodal probability density (units length^-d).
class DensityField {
 public:
  DensityField() = default;
  DensityField(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    require(values_.size() == grid_.size(), ErrorKind::GridMismatch,
            "value count does not match grid node count");
    for (double v : values_) {
      require(std::isfinite(v), ErrorKind::NonFiniteValue, "density values must be finite");
      require(v >= 0.0, ErrorKind::InvalidArgument, "density values must be nonnegative");
    }
  }

  /// Unit point mass carried by the cell of one node: mass / weight.
  static DensityField point_mass(const GridSpec& grid, std::size_t flat) {
    std::vector<double> v(grid.size(), 0.0);
    v.at(flat) = 1.0 / grid.weight(flat);
    return DensityField(grid, std::move(v));
  }

  const GridSpec& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  GridFunction as_function() const { return GridFunction(grid_, values_, FieldRole::density); }

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

template <typename F>
concept GridField = requires(const F& f) {
  { f.grid() } -> std::convertible_to<const GridSpec&>;
  { f.values() } -> std::convertible_to<std::span<const double>>;
};

/// Trapezoid-rule integral over the grid box. Throws NonFiniteValue.
template <GridField F>
double quadrature(const F& f) {
  const GridSpec& g = f.grid();
  const auto v = f.values();
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(std::isfinite(v[i]), ErrorKind::NonFiniteValue, "quadrature of a non-finite value");
    s += g.weight(i) * v[i];
  }
  return s;
}

/// <f, g> = quadrature of the pointwise product.
template <GridField F, GridField G>
double inner_product(const F& f, const G& g) {
  require(f.grid() == g.grid(), ErrorKind::GridMismatch, "inner product of fields on different grids");
  const GridSpec& grid = f.grid();
  const auto a = f.values();
  const auto b = g.values();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double p = a[i] * b[i];
    require(std::isfinite(p), ErrorKind::NonFiniteValue, "inner product of non-finite values");
    s += grid.weight(i) * p;
  }
  return s;
}

/// Rescales a density to unit quadrature mass. Densities already at unit
/// mass (to 1e-13) are returned unchanged, which makes the map idempotent.
inline DensityField normalize(const DensityField& f) {
  const double mass = quadrature(f);
  require(mass > 0.0, ErrorKind::NonPositiveMass, "cannot normalize a density with zero mass");
  if (std::abs(mass - 1.0) <= 1e-13) return f;
  std::vector<double> v(f.values().begin(), f.values().end());
  for (double& x : v) x /= mass;
  return DensityField(f.grid(), std::move(v));
}

inline DensityField normalize(const GridFunction& f) {
  return normalize(DensityField(f.grid(), std::vector<double>(f.values().begin(), f.values().end())));
}

enum class ConvolutionMethod { automatic, direct, spectral };

namespace detail {

inline void check_convolution(const GridSpec& g, const GridSpec& k) {
  require(g.dim() == k.dim(), ErrorKind::GridMismatch, "convolution operands differ in dimension");
  require(k.has_center_node(), ErrorKind::GridMismatch, "kernel grid must have an odd node count");
  require(g.same_spacing(k), ErrorKind::GridMismatch, "kernel spacing differs from field spacing");
  require(k.half_width() <= g.half_width() * (1.0 + 1e-12), ErrorKind::KernelTooWide,
          "kernel support exceeds the grid box");
}

inline std::vector<double> convolve_direct(const GridSpec& g, std::span<const double> wf,
                                           const GridSpec& k, std::span<const double> kv) {
  const int dim = g.dim();
  const int n = g.points_per_axis();
  const int m = k.center_index();
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Index ii = g.unflatten(i);
    double acc = 0.0;
    for (std::size_t o = 0; o < kv.size(); ++o) {
      if (kv[o] == 0.0) continue;
      const Index oo = k.unflatten(o);
      Index jj{0, 0, 0};
      bool inside = true;
      for (int a = 0; a < dim; ++a) {
        jj[a] = ii[a] - (oo[a] - m);
        if (jj[a] < 0 || jj[a] >= n) {
          inside = false;
          break;
        }
      }
      if (inside) acc += wf[g.flatten(jj)] * kv[o];
    }
    out[i] = acc;
  }
  return out;
}

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::vector<double> convolve_spectral(const GridSpec& g, std::span<const double> wf,
                                             const GridSpec& k, std::span<const double> kv) {
  const int dim = g.dim();
  const int n = g.points_per_axis();
  const int kn = k.points_per_axis();
  const int m = k.center_index();
  // Zero padding to n + kn - 1 makes the circular product a linear one.
  const int L = n + kn - 1;
  std::array<int, 3> dims{1, 1, 1};
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) {
    dims[a] = L;
    total *= static_cast<std::size_t>(L);
  }
  const std::size_t last_complex = static_cast<std::size_t>(L / 2 + 1);
  const std::size_t ctotal = total / static_cast<std::size_t>(L) * last_complex;

  std::vector<double> a(total, 0.0), b(total, 0.0), r(total, 0.0);
  std::vector<std::complex<double>> A(ctotal), B(ctotal);

  auto pad_index = [&](const Index& idx) {
    std::size_t flat = 0;
    for (int ax = 0; ax < dim; ++ax) flat = flat * static_cast<std::size_t>(L) + static_cast<std::size_t>(idx[ax]);
    return flat;
  };
  for (std::size_t i = 0; i < wf.size(); ++i) a[pad_index(g.unflatten(i))] = wf[i];
  for (std::size_t o = 0; o < kv.size(); ++o) b[pad_index(k.unflatten(o))] = kv[o];

  fftw_plan pa, pb, pr;
  {
    std::lock_guard lock(fftw_planner_mutex());
    pa = fftw_plan_dft_r2c(dim, dims.data(), a.data(), reinterpret_cast<fftw_complex*>(A.data()), FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c(dim, dims.data(), b.data(), reinterpret_cast<fftw_complex*>(B.data()), FFTW_ESTIMATE);
    pr = fftw_plan_dft_c2r(dim, dims.data(), reinterpret_cast<fftw_complex*>(A.data()), r.data(), FFTW_ESTIMATE);
  }
  fftw_execute(pa);
  fftw_execute(pb);
  for (std::size_t i = 0; i < ctotal; ++i) A[i] *= B[i];
  fftw_execute(pr);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(pr);
  }

  const double scale = 1.0 / static_cast<double>(total);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Index idx = g.unflatten(i);
    for (int ax = 0; ax < dim; ++ax) idx[ax] += m;
    out[i] = r[pad_index(idx)] * scale;
  }
  return out;
}

}  // namespace detail

/// Discrete convolution (f*k)(x_i) = sum_j w_j f_j k(x_i - x_j) with the
/// trapezoid weights of f's grid. The kernel lives on its own odd grid
/// with the same spacing, centred on the origin.
///
/// Throws GridMismatch or KernelTooWide.
template <GridField F, GridField K>
GridFunction convolve(const F& f, const K& kernel, ConvolutionMethod method = ConvolutionMethod::automatic) {
  const GridSpec& g = f.grid();
  const GridSpec& k = kernel.grid();
  detail::check_convolution(g, k);
  const auto fv = f.values();
  std::vector<double> wf(fv.size());
  for (std::size_t i = 0; i < wf.size(); ++i) {
    require(std::isfinite(fv[i]), ErrorKind::NonFiniteValue, "convolution of a non-finite field");
    wf[i] = g.weight(i) * fv[i];
  }
  if (method == ConvolutionMethod::automatic) {
    const double work = static_cast<double>(g.size()) * static_cast<double>(k.size());
    method = (work > 2.0e6 && k.points_per_axis() > 5) ? ConvolutionMethod::spectral : ConvolutionMethod::direct;
  }
  auto out = method == ConvolutionMethod::spectral ? detail::convolve_spectral(g, wf, k, kernel.values())
                                                   : detail::convolve_direct(g, wf, k, kernel.values());
  return GridFunction(g, std::move(out), FieldRole::field);
}

/// Restricts a field living on a grid with odd node count to a concentric
/// kernel grid of the same spacing (used to turn a centred field into a
/// convolution kernel).
template <GridField F>
GridFunction restrict_to_kernel(const F& f, int half_nodes) {
  const GridSpec& g = f.grid();
  require(g.has_center_node(), ErrorKind::GridMismatch, "kernel extraction needs an odd grid");
  require(half_nodes <= g.center_index(), ErrorKind::KernelTooWide, "kernel larger than source grid");
  const GridSpec k = GridSpec::kernel(g.dim(), g.spacing(), half_nodes);
  std::vector<double> v(k.size());
  const int shift = g.center_index() - half_nodes;
  for (std::size_t o = 0; o < v.size(); ++o) {
    Index idx = k.unflatten(o);
    for (int a = 0; a < g.dim(); ++a) idx[a] += shift;
    v[o] = f.values()[g.flatten(idx)];
  }
  return GridFunction(k, std::move(v), FieldRole::field);
}

}  // namespace hartree
