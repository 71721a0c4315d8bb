#pragma once

// Direct Monte Carlo for the interacting N-path model: replica weights
// exp(-H - K^(N)) (optionally times exp(beta N <f, mu_bar>)), the
// per-particle free energy (1/(N beta)) log mean weight, and the
// self-normalised weighted mean occupation density.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hartree/error.hpp"
#include "hartree/feynman_kac.hpp"
#include "hartree/fingerprint.hpp"
#include "hartree/grid.hpp"
#include "hartree/hamiltonians.hpp"
#include "hartree/parallel.hpp"
#include "hartree/paths.hpp"
#include "hartree/potentials.hpp"

namespace hartree {

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int replicas = 0;
  double ess = 0.0;               ///< (sum w)^2 / sum w^2
  double jensen_bound = 0.0;      ///< (1/(N beta)) mean log-weight; value >= this
  bool weights_bounded = true;    ///< every log-weight <= beta N sup|f|
  std::size_t hard_wall_hits = 0; ///< replicas with zero weight
  std::size_t clipped = 0;        ///< time nodes outside the grid box
  std::string fingerprint;
};

struct McSetup {
  int N = 2;
  double beta = 1.0;
  TrapSpec W;
  PairSpec v;
  InitialDistribution init;
  GridSpec grid;
  double dt = 1.0 / 64;
  int M = 1000;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string init_text(const InitialDistribution& init) {
  return std::to_string(static_cast<int>(init.kind)) + "," + format_double(init.center[0]) + "," +
         format_double(init.center[1]) + "," + format_double(init.center[2]) + "," + format_double(init.width);
}

inline Fingerprint mc_fingerprint(std::string_view op, const McSetup& s) {
  Fingerprint fp;
  fp.add("op", op)
      .add("N", s.N)
      .add("beta", s.beta)
      .add("trap", std::to_string(static_cast<int>(s.W.family)) + "," + format_double(s.W.parameter))
      .add("pair", std::to_string(static_cast<int>(s.v.family)) + "," + format_double(s.v.strength) + "," +
                       format_double(s.v.range) + "," + std::to_string(s.v.dim))
      .add("init", init_text(s.init))
      .add("grid", std::to_string(s.grid.dim()) + "," + format_double(s.grid.half_width()) + "," +
                       std::to_string(s.grid.points_per_axis()))
      .add("dt", s.dt)
      .add("M", s.M)
      .add("seed", s.seed);
  return fp;
}

inline void check_setup(const McSetup& s) {
  require(s.N >= 2, ErrorKind::InvalidArgument, "Monte Carlo free energy needs N >= 2");
  require(s.grid.dim() == 2 || s.grid.dim() == 3, ErrorKind::UnsupportedDimension,
          "the interacting model is defined for d = 2, 3 only");
  require(s.v.dim == s.grid.dim(), ErrorKind::InvalidDimension, "pair potential dimension differs from the grid");
  require(s.M >= 100, ErrorKind::InvalidArgument, "Monte Carlo needs M >= 100 replicas");
  s.init.validate(s.W, s.grid.dim());
}

struct ReplicaWeights {
  std::vector<double> logw;
  std::size_t clipped = 0;
};

/// log-weight of replica r: -H - K^(N) + sum_i sum_k w_k f(cell of X^i_k).
inline ReplicaWeights replica_log_weights(const McSetup& s, const GridFunction* f) {
  ReplicaWeights out;
  out.logw.resize(static_cast<std::size_t>(s.M));
  std::vector<std::size_t> clipped(static_cast<std::size_t>(s.M), 0);
  const bool interacting = s.v.strength > 0.0;
  parallel_for(static_cast<std::size_t>(s.M), [&](std::size_t r) {
    const PathEnsemble ens = sample_paths(s.N, s.beta, s.dt, s.init, s.grid.dim(), s.seed, r);
    double l = -trap_energy(ens, s.W);
    if (std::isfinite(l) && interacting) l -= scaled_pair_energy(ens, s.v);
    const auto tw = ens.weights();
    std::size_t c = 0;
    double tilt = 0.0;
    for (int i = 0; i < s.N; ++i)
      for (int k = 0; k <= ens.steps(); ++k) {
        bool cl = false;
        const std::size_t node = s.grid.locate(ens.position(i, k), cl);
        c += cl;
        if (f) tilt += tw[k] * (*f)[node];
      }
    out.logw[r] = l + tilt;
    clipped[r] = c;
  });
  for (std::size_t c : clipped) out.clipped += c;
  return out;
}

inline McEstimate summarize(const McSetup& s, const ReplicaWeights& rw, double tilt_bound, std::string fp) {
  const McValue lme = log_mean_exp(rw.logw);
  const double scale = 1.0 / (s.N * s.beta);
  McEstimate e;
  e.value = lme.estimate * scale;
  e.std_error = lme.std_error * scale;
  e.replicas = s.M;
  e.clipped = rw.clipped;
  e.fingerprint = std::move(fp);
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : rw.logw) mx = std::max(mx, l);
  double s1 = 0.0, s2 = 0.0, mean_log = 0.0;
  for (double l : rw.logw) {
    const double w = std::exp(l - mx);
    s1 += w;
    s2 += w * w;
    mean_log += l;
    if (!std::isfinite(l)) ++e.hard_wall_hits;
    if (l > tilt_bound) e.weights_bounded = false;
  }
  e.ess = s1 * s1 / s2;
  e.jensen_bound = mean_log / s.M * scale;
  return e;
}

}  // namespace detail

/// (1/(N beta)) log mean_r exp(-H - K^(N)) over M replicas.
/// Throws AllWeightsZero.
inline McEstimate free_energy(const McSetup& s) {
  detail::check_setup(s);
  const auto rw = detail::replica_log_weights(s, nullptr);
  return detail::summarize(s, rw, 1e-12, detail::mc_fingerprint("free_energy", s).hex());
}

inline McEstimate free_energy(int N, double beta, const TrapSpec& W, const PairSpec& v,
                              const InitialDistribution& init, const GridSpec& grid, double dt, int M,
                              std::uint64_t seed) {
  return free_energy(McSetup{N, beta, W, v, init, grid, dt, M, seed});
}

/// As free_energy with weights multiplied by exp(beta N <f, mu_bar>).
inline McEstimate tilted_free_energy(const GridFunction& f, const McSetup& s) {
  detail::check_setup(s);
  require(f.grid() == s.grid, ErrorKind::GridMismatch, "tilt lives on a different grid");
  double sup = 0.0;
  for (double x : f.values()) {
    require(std::isfinite(x), ErrorKind::NonFiniteValue, "tilt must be finite");
    sup = std::max(sup, std::abs(x));
  }
  const auto rw = detail::replica_log_weights(s, &f);
  Fingerprint fp = detail::mc_fingerprint("tilted_free_energy", s);
  fp.add("f", hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(f.values().data()),
                                             f.values().size() * sizeof(double)))));
  const double bound = s.beta * s.N * sup * (1.0 + 1e-12) + 1e-12;
  return detail::summarize(s, rw, bound, fp.hex());
}

inline McEstimate tilted_free_energy(const GridFunction& f, int N, double beta, const TrapSpec& W,
                                     const PairSpec& v, const InitialDistribution& init, const GridSpec& grid,
                                     double dt, int M, std::uint64_t seed) {
  return tilted_free_energy(f, McSetup{N, beta, W, v, init, grid, dt, M, seed});
}

struct WeightedOccupation {
  DensityField density;
  std::vector<double> std_error;  ///< cellwise, self-normalised delta method
  double ess = 0.0;
  int replicas = 0;
  std::string fingerprint;
};

/// sum_r w_r mu_bar_r / sum_r w_r with w_r = exp(-H - K^(N)).
/// Replicas are regenerated in a second pass and accumulated in fixed
/// chunks reduced in order, so the result does not depend on the thread
/// count. Throws AllWeightsZero.
inline WeightedOccupation weighted_mean_occupation(const McSetup& s) {
  detail::check_setup(s);
  const auto rw = detail::replica_log_weights(s, nullptr);
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : rw.logw) mx = std::max(mx, l);
  require(std::isfinite(mx), ErrorKind::AllWeightsZero, "every replica has zero weight");
  std::vector<double> w(rw.logw.size());
  double total = 0.0;
  for (std::size_t r = 0; r < w.size(); ++r) total += (w[r] = std::exp(rw.logw[r] - mx));
  for (double& x : w) x /= total;

  const std::size_t size = s.grid.size();
  constexpr std::size_t chunk = 64;
  const std::size_t chunks = (w.size() + chunk - 1) / chunk;
  // Per chunk: sum w mu, sum w^2 mu^2, sum w^2 mu.
  std::vector<std::vector<double>> A(chunks), B(chunks), C(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    A[c].assign(size, 0.0);
    B[c].assign(size, 0.0);
    C[c].assign(size, 0.0);
    for (std::size_t r = c * chunk; r < std::min(w.size(), (c + 1) * chunk); ++r) {
      if (w[r] == 0.0) continue;
      const PathEnsemble ens = sample_paths(s.N, s.beta, s.dt, s.init, s.grid.dim(), s.seed, r);
      const DensityField mu = mean_occupation(ens, s.grid);
      for (std::size_t x = 0; x < size; ++x) {
        const double m = mu[x];
        if (m == 0.0) continue;
        A[c][x] += w[r] * m;
        B[c][x] += w[r] * w[r] * m * m;
        C[c][x] += w[r] * w[r] * m;
      }
    }
  });
  std::vector<double> est(size, 0.0), m2(size, 0.0), m1(size, 0.0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t x = 0; x < size; ++x) {
      est[x] += A[c][x];
      m2[x] += B[c][x];
      m1[x] += C[c][x];
    }
  double w2 = 0.0;
  for (double x : w) w2 += x * x;
  WeightedOccupation out;
  out.std_error.resize(size);
  for (std::size_t x = 0; x < size; ++x)
    out.std_error[x] = std::sqrt(std::max(0.0, m2[x] - 2.0 * est[x] * m1[x] + est[x] * est[x] * w2));
  out.density = DensityField(s.grid, std::move(est));
  out.ess = 1.0 / w2;
  out.replicas = s.M;
  out.fingerprint = detail::mc_fingerprint("weighted_mean_occupation", s).hex();
  return out;
}

inline WeightedOccupation weighted_mean_occupation(int N, double beta, const TrapSpec& W, const PairSpec& v,
                                                   const InitialDistribution& init, const GridSpec& grid, double dt,
                                                   int M, std::uint64_t seed) {
  return weighted_mean_occupation(McSetup{N, beta, W, v, init, grid, dt, M, seed});
}

}  // namespace hartree
