#pragma once

// Brownian paths with generator Delta (transition variance 2t per
// coordinate, so that the Feynman-Kac pairing is with -Delta + W) and
// their normalised occupation measures.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "hartree/error.hpp"
#include "hartree/grid.hpp"
#include "hartree/potentials.hpp"

namespace hartree {

enum class InitKind { point, gaussian, uniform_box };

/// Common initial law of every path. `center` shifts all three kinds;
/// `width` is the per-coordinate std (gaussian) or half-width (uniform_box).
struct InitialDistribution {
  InitKind kind = InitKind::point;
  Point center{0.0, 0.0, 0.0};
  double width = 0.0;

  static InitialDistribution point(Point x0 = {0.0, 0.0, 0.0}) { return {InitKind::point, x0, 0.0}; }
  static InitialDistribution gaussian(Point x0, double s) {
    require(s > 0.0, ErrorKind::InvalidArgument, "gaussian initial width must be positive");
    return {InitKind::gaussian, x0, s};
  }
  static InitialDistribution uniform_box(double r0, Point x0 = {0.0, 0.0, 0.0}) {
    require(r0 > 0.0, ErrorKind::InvalidArgument, "uniform initial half-width must be positive");
    return {InitKind::uniform_box, x0, r0};
  }

  template <typename Engine>
  Point draw(Engine& eng, int dim) const {
    Point x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) {
      switch (kind) {
        case InitKind::point: x[a] = center[a]; break;
        case InitKind::gaussian: x[a] = center[a] + width * std::normal_distribution<double>{}(eng); break;
        case InitKind::uniform_box:
          x[a] = center[a] + std::uniform_real_distribution<double>{-width, width}(eng);
          break;
      }
    }
    return x;
  }

  /// Support must sit strictly inside {W < inf}. Throws InfeasibleInit.
  void validate(const TrapSpec& trap, int dim) const {
    if (!trap.is_hard_wall()) return;
    require(kind != InitKind::gaussian, ErrorKind::InfeasibleInit,
            "a gaussian initial law has unbounded support and cannot start inside a box trap");
    const double reach = kind == InitKind::uniform_box ? width : 0.0;
    for (int a = 0; a < dim; ++a)
      require(std::abs(center[a]) + reach < trap.parameter, ErrorKind::InfeasibleInit,
              "initial support is not strictly inside the box trap");
  }

  /// Grid density of the initial law; a point start becomes a unit mass on
  /// one cell.
  DensityField density(const GridSpec& grid) const {
    const int dim = grid.dim();
    if (kind == InitKind::point) {
      bool clipped = false;
      const std::size_t node = grid.locate(center, clipped);
      require(!clipped, ErrorKind::InfeasibleInit, "point start lies outside the grid");
      return DensityField::point_mass(grid, node);
    }
    std::vector<double> v(grid.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (grid.on_boundary(i)) continue;
      const Point x = grid.node(i);
      double p = 1.0;
      for (int a = 0; a < dim; ++a) {
        const double z = x[a] - center[a];
        if (kind == InitKind::gaussian) {
          p *= std::exp(-0.5 * z * z / (width * width));
        } else {
          p *= std::abs(z) <= width ? 1.0 : 0.0;
        }
      }
      v[i] = p;
    }
    DensityField d(grid, std::move(v));
    require(quadrature(d) > 0.0, ErrorKind::InfeasibleInit, "initial law has no mass on the grid");
    return normalize(d);
  }
};

/// Trapezoid time weights on [0, beta]: dt each, halved at both ends.
inline std::vector<double> time_weights(int steps, double dt) {
  std::vector<double> w(static_cast<std::size_t>(steps) + 1, dt);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

/// N discretised paths on the time grid k*dt, k = 0..steps.
class PathEnsemble {
 public:
  PathEnsemble() = default;

  /// Wraps explicit positions (N x (steps+1) x dim, row-major); used for
  /// frozen-path tests and path dumps read back from disk.
  static PathEnsemble from_positions(int N, double beta, int steps, int dim, std::vector<double> positions,
                                     std::uint64_t seed = 0, std::uint64_t replica_id = 0) {
    require(N >= 1 && steps >= 1 && beta > 0.0, ErrorKind::InvalidArgument, "invalid ensemble shape");
    require(dim >= 1 && dim <= 3, ErrorKind::InvalidDimension, "path dimension must be 1..3");
    require(positions.size() == static_cast<std::size_t>(N) * (steps + 1) * dim, ErrorKind::InvalidArgument,
            "position array does not match ensemble shape");
    PathEnsemble e;
    e.N_ = N;
    e.beta_ = beta;
    e.steps_ = steps;
    e.dim_ = dim;
    e.dt_ = beta / steps;
    e.positions_ = std::move(positions);
    e.seed_ = seed;
    e.replica_id_ = replica_id;
    return e;
  }

  int N() const { return N_; }
  double beta() const { return beta_; }
  double dt() const { return dt_; }
  int steps() const { return steps_; }
  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t replica_id() const { return replica_id_; }

  Point position(int path, int step) const {
    Point x{0.0, 0.0, 0.0};
    const double* p = raw(path, step);
    for (int a = 0; a < dim_; ++a) x[a] = p[a];
    return x;
  }

  const double* raw(int path, int step) const {
    return positions_.data() + (static_cast<std::size_t>(path) * (steps_ + 1) + step) * dim_;
  }

  std::span<const double> positions() const { return positions_; }
  std::vector<double> weights() const { return time_weights(steps_, dt_); }

  friend bool operator==(const PathEnsemble&, const PathEnsemble&) = default;

 private:
  int N_ = 0;
  double beta_ = 0.0;
  double dt_ = 0.0;
  int steps_ = 0;
  int dim_ = 1;
  std::vector<double> positions_;
  std::uint64_t seed_ = 0;
  std::uint64_t replica_id_ = 0;
};

/// Number of time steps for a requested dt; the effective step is beta/steps.
/// Throws InvalidTimeStep unless 0 < dt <= beta/16.
inline int time_steps(double beta, double dt) {
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "beta must be positive");
  require(dt > 0.0 && dt <= beta / 16.0 * (1.0 + 1e-12), ErrorKind::InvalidTimeStep,
          "time step must satisfy 0 < dt <= beta/16");
  return static_cast<int>(std::lround(beta / dt));
}

namespace detail {

/// Independent engine for (seed, replica, path).
inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t replica_id, std::uint64_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replica_id), static_cast<std::uint32_t>(replica_id >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

/// Writes one path (steps+1 points) into `out`.
inline void generate_path(std::span<double> out, int steps, int dim, double dt, const InitialDistribution& init,
                          std::uint64_t seed, std::uint64_t replica_id, std::uint64_t path) {
  auto eng = path_engine(seed, replica_id, path);
  std::normal_distribution<double> normal;
  const Point x0 = init.draw(eng, dim);
  for (int a = 0; a < dim; ++a) out[a] = x0[a];
  const double scale = std::sqrt(2.0 * dt);
  for (int k = 1; k <= steps; ++k) {
    const std::size_t cur = static_cast<std::size_t>(k) * dim;
    for (int a = 0; a < dim; ++a) out[cur + a] = out[cur - dim + a] + scale * normal(eng);
  }
}

}  // namespace detail

/// Euler scheme X_{k+1} = X_k + sqrt(2 dt) xi_k with one engine per
/// (replica_id, path index), all derived from `seed`.
inline PathEnsemble sample_paths(int N, double beta, double dt, const InitialDistribution& init, int dim,
                                 std::uint64_t seed, std::uint64_t replica_id = 0) {
  require(N >= 1, ErrorKind::InvalidArgument, "ensemble needs N >= 1");
  require(dim >= 1 && dim <= 3, ErrorKind::InvalidDimension, "path dimension must be 1..3");
  const int steps = time_steps(beta, dt);
  const double dt_eff = beta / steps;
  const std::size_t per_path = static_cast<std::size_t>(steps + 1) * dim;
  std::vector<double> pos(per_path * N);
  for (int i = 0; i < N; ++i) {
    detail::generate_path(std::span<double>(pos).subspan(per_path * i, per_path), steps, dim, dt_eff, init, seed,
                          replica_id, static_cast<std::uint64_t>(i));
  }
  return PathEnsemble::from_positions(N, beta, steps, dim, std::move(pos), seed, replica_id);
}

struct OccupationMeasure {
  DensityField density;
  int path_index = 0;
  std::uint64_t seed = 0;
  std::size_t clipped = 0;  ///< time nodes that fell outside the grid box
};

namespace detail {

/// Adds scale * (occupation density of one path) into `acc`; returns the
/// number of clipped time nodes.
inline std::size_t deposit_path(std::span<double> acc, const GridSpec& grid, const double* path, int steps, int dim,
                                std::span<const double> tw, double beta, double scale) {
  std::size_t clipped = 0;
  for (int k = 0; k <= steps; ++k) {
    Point x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) x[a] = path[static_cast<std::size_t>(k) * dim + a];
    bool c = false;
    const std::size_t node = grid.locate(x, c);
    if (c) ++clipped;
    acc[node] += scale * tw[k] / beta / grid.weight(node);
  }
  return clipped;
}

}  // namespace detail

/// Normalised occupation measure of one path as a grid density: time node
/// k deposits w_k/beta into the cell containing X_k. Throws IndexOutOfRange.
inline OccupationMeasure occupation_measure(const PathEnsemble& ens, int path_index, const GridSpec& grid) {
  require(path_index >= 0 && path_index < ens.N(), ErrorKind::IndexOutOfRange, "path index out of range");
  require(grid.dim() == ens.dim(), ErrorKind::GridMismatch, "grid and ensemble dimensions differ");
  std::vector<double> acc(grid.size(), 0.0);
  const auto tw = ens.weights();
  const std::size_t clipped =
      detail::deposit_path(acc, grid, ens.raw(path_index, 0), ens.steps(), ens.dim(), tw, ens.beta(), 1.0);
  return OccupationMeasure{DensityField(grid, std::move(acc)), path_index, ens.seed(), clipped};
}

/// Mean of the N occupation measures.
inline DensityField mean_occupation(const PathEnsemble& ens, const GridSpec& grid) {
  require(grid.dim() == ens.dim(), ErrorKind::GridMismatch, "grid and ensemble dimensions differ");
  std::vector<double> acc(grid.size(), 0.0);
  const auto tw = ens.weights();
  const double scale = 1.0 / ens.N();
  for (int i = 0; i < ens.N(); ++i)
    detail::deposit_path(acc, grid, ens.raw(i, 0), ens.steps(), ens.dim(), tw, ens.beta(), scale);
  return DensityField(grid, std::move(acc));
}

/// Total number of clipped time nodes over all paths.
inline std::size_t count_clipped(const PathEnsemble& ens, const GridSpec& grid) {
  std::size_t c = 0;
  for (int i = 0; i < ens.N(); ++i)
    for (int k = 0; k <= ens.steps(); ++k) {
      bool clipped = false;
      grid.locate(ens.position(i, k), clipped);
      if (clipped) ++c;
    }
  return c;
}

/// CSV dump: replica,path,step,x0[,x1[,x2]].
inline void write_paths_csv(std::ostream& os, const PathEnsemble& ens) {
  os << "replica,path,step";
  for (int a = 0; a < ens.dim(); ++a) os << ",x" << a;
  os << "\r\n";
  os.precision(17);
  for (int i = 0; i < ens.N(); ++i)
    for (int k = 0; k <= ens.steps(); ++k) {
      os << ens.replica_id() << ',' << i << ',' << k;
      const double* p = ens.raw(i, k);
      for (int a = 0; a < ens.dim(); ++a) os << ',' << p[a];
      os << "\r\n";
    }
}

}  // namespace hartree
