#pragma once

// Trap potentials W and radial pair interactions v, their Born integrals
// and the N-dependent rescaling v_N(r) = N^{d-1} v(N r).

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hartree/error.hpp"
#include "hartree/grid.hpp"

namespace hartree {

/// Marker for the exterior of a hard-wall trap.
inline constexpr double kHardWall = std::numeric_limits<double>::infinity();

enum class TrapFamily { harmonic, quartic, box };

struct TrapSpec {
  TrapFamily family = TrapFamily::harmonic;
  /// Strength w for harmonic/quartic, half-width R_box for box.
  double parameter = 1.0;

  static TrapSpec harmonic(double w) { return make(TrapFamily::harmonic, w); }
  static TrapSpec quartic(double w) { return make(TrapFamily::quartic, w); }
  static TrapSpec box(double half_width) {
    require(half_width > 0.0, ErrorKind::InvalidArgument, "box trap half-width must be positive");
    return TrapSpec{TrapFamily::box, half_width};
  }

  bool is_hard_wall() const { return family == TrapFamily::box; }

 private:
  static TrapSpec make(TrapFamily f, double w) {
    // w = 0 is admitted as the free (W = 0) test case.
    require(std::isfinite(w) && w >= 0.0, ErrorKind::InvalidArgument, "trap strength must be >= 0");
    return TrapSpec{f, w};
  }
};

/// W(x); +inf only outside a box trap.
inline double eval_trap(const TrapSpec& spec, const Point& x, int dim) {
  switch (spec.family) {
    case TrapFamily::harmonic: return spec.parameter * norm2(x, dim);
    case TrapFamily::quartic: {
      const double r2 = norm2(x, dim);
      return spec.parameter * r2 * r2;
    }
    case TrapFamily::box:
      for (int a = 0; a < dim; ++a)
        if (!(std::abs(x[a]) < spec.parameter)) return kHardWall;
      return 0.0;
  }
  return 0.0;
}

/// Samples W on a grid; hard-wall nodes hold +inf.
inline GridFunction trap_field(const TrapSpec& spec, const GridSpec& grid) {
  return GridFunction::sample(grid, [&](const Point& x) { return eval_trap(spec, x, grid.dim()); },
                              FieldRole::potential);
}

/// Finite stand-in for -W used inside Feynman-Kac composites: the hard
/// wall becomes a tilt of `floor` (default -1e6).
inline constexpr double kHardWallTilt = -1.0e6;

inline GridFunction trap_tilt(const TrapSpec& spec, const GridSpec& grid, double floor = kHardWallTilt) {
  return GridFunction::sample(
      grid,
      [&](const Point& x) {
        const double w = eval_trap(spec, x, grid.dim());
        return std::isfinite(w) ? std::max(-w, floor) : floor;
      },
      FieldRole::tilt);
}

enum class PairFamily { gaussian, ball };

struct PairSpec {
  PairFamily family = PairFamily::gaussian;
  double strength = 1.0;  ///< c
  double range = 1.0;     ///< sigma (gaussian) or r0 (ball)
  int dim = 3;

  static PairSpec gaussian(double c, double sigma, int dim) { return make(PairFamily::gaussian, c, sigma, dim); }
  static PairSpec ball(double c, double r0, int dim) { return make(PairFamily::ball, c, r0, dim); }

  /// v(r). Throws NegativeRadius.
  double operator()(double r) const {
    require(r >= 0.0, ErrorKind::NegativeRadius, "pair potential evaluated at negative radius");
    switch (family) {
      case PairFamily::gaussian: return strength * std::exp(-(r * r) / (range * range));
      case PairFamily::ball: return r <= range ? strength : 0.0;
    }
    return 0.0;
  }

  /// Radius beyond which v vanishes (gaussian: truncation at 8 sigma,
  /// where v/c < 2e-28).
  double support_radius() const { return family == PairFamily::ball ? range : 8.0 * range; }

 private:
  static PairSpec make(PairFamily f, double c, double range, int dim) {
    // c = 0 is admitted as the non-interacting test case.
    require(std::isfinite(c) && c >= 0.0, ErrorKind::InvalidArgument, "pair strength must be >= 0");
    require(std::isfinite(range) && range > 0.0, ErrorKind::InvalidArgument, "pair range must be positive");
    require(dim >= 1 && dim <= 3, ErrorKind::InvalidDimension, "pair dimension must be 1..3");
    return PairSpec{f, c, range, dim};
  }
};

inline double eval_pair(const PairSpec& spec, double r) { return spec(r); }

/// v_N(r) = N^{d-1} v(N r).
struct RescaledPair {
  PairSpec base;
  int N = 1;
  int dim = 3;

  double operator()(double r) const {
    require(r >= 0.0, ErrorKind::NegativeRadius, "pair potential evaluated at negative radius");
    return std::pow(static_cast<double>(N), dim - 1) * base(static_cast<double>(N) * r);
  }

  double support_radius() const { return base.support_radius() / N; }
};

inline RescaledPair rescale_pair(const PairSpec& spec, int N) {
  require(N >= 1, ErrorKind::InvalidArgument, "rescaling needs N >= 1");
  return RescaledPair{spec, N, spec.dim};
}

template <typename V>
concept RadialPotential = requires(const V& v, double r) {
  { v(r) } -> std::convertible_to<double>;
  { v.support_radius() } -> std::convertible_to<double>;
};

namespace detail {

inline double sphere_area(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    default: return 4.0 * std::numbers::pi;
  }
}

/// Composite Simpson rule on [a, b] with an even number of panels.
template <typename Fn>
double simpson(Fn&& fn, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double s = fn(a) + fn(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * fn(a + i * h);
  return s * h / 3.0;
}

}  // namespace detail

/// Full-space integral of x -> v(|x|) by radial quadrature, split at the
/// support edge so a ball's discontinuity falls on a panel boundary.
template <RadialPotential V>
double radial_integral(const V& v, int dim) {
  const double edge = v.support_radius();
  const double area = detail::sphere_area(dim);
  auto integrand = [&](double r) { return area * std::pow(r, dim - 1) * v(r); };
  // Evaluate just inside the edge: ball potentials are closed at r0.
  auto inside = [&](double r) { return r >= edge ? area * std::pow(edge, dim - 1) * v(edge) : integrand(r); };
  return detail::simpson(inside, 0.0, edge, 20000);
}

/// alpha(v) = (1/8pi) * integral of v(|y|) over R^d, in closed form.
/// Throws UnsupportedDimension unless dim is 2 or 3.
inline double alpha_of_v(const PairSpec& spec) {
  require(spec.dim == 2 || spec.dim == 3, ErrorKind::UnsupportedDimension,
          "alpha(v) is defined for d = 2, 3 only");
  const double pi = std::numbers::pi;
  double integral = 0.0;
  switch (spec.family) {
    case PairFamily::ball:
      integral = spec.dim == 2 ? pi * spec.range * spec.range : 4.0 / 3.0 * pi * std::pow(spec.range, 3);
      break;
    case PairFamily::gaussian:
      integral = std::pow(pi, 0.5 * spec.dim) * std::pow(spec.range, spec.dim);
      break;
  }
  return spec.strength * integral / (8.0 * pi);
}

/// Quadrature fallback for alpha(v); agrees with alpha_of_v to 1e-6 relative.
inline double alpha_of_v_quadrature(const PairSpec& spec) {
  require(spec.dim == 2 || spec.dim == 3, ErrorKind::UnsupportedDimension,
          "alpha(v) is defined for d = 2, 3 only");
  return radial_integral(spec, spec.dim) / (8.0 * std::numbers::pi);
}

/// Integral of N^d v(N|x|) over R^d by radial quadrature; equals the
/// integral of v by substitution.
inline double rescaled_mass(const RescaledPair& v) {
  return static_cast<double>(v.N) * radial_integral(v, v.dim);
}

/// Samples a radial potential on a centred kernel grid covering its
/// support. Throws KernelTooWide if that exceeds the host grid.
template <RadialPotential V>
GridFunction pair_kernel(const V& v, const GridSpec& host) {
  const double h = host.spacing();
  const int half_nodes = std::max(1, static_cast<int>(std::ceil(v.support_radius() / h - 1e-9)));
  require(half_nodes * h <= host.half_width() * (1.0 + 1e-12), ErrorKind::KernelTooWide,
          "pair potential support exceeds the grid box");
  const GridSpec k = GridSpec::kernel(host.dim(), h, half_nodes);
  return GridFunction::sample(k, [&](const Point& x) { return v(std::sqrt(norm2(x, k.dim()))); },
                              FieldRole::potential);
}

}  // namespace hartree
