#pragma once

#include <gtest/gtest.h>

#include <functional>
#include <vector>

#include "hartree/hartree.hpp"

namespace hartree::testing {

/// Runs fn and reports whether it threw hartree::Error of the given kind.
inline ::testing::AssertionResult throws_kind(const std::function<void()>& fn, ErrorKind kind) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.kind() == kind) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << "threw " << to_string(e.kind()) << ": " << e.what();
  }
  return ::testing::AssertionFailure() << "did not throw";
}

/// Ensemble whose paths sit still at the given points.
inline PathEnsemble frozen(const std::vector<Point>& at, int dim, double beta = 1.0, int steps = 16) {
  std::vector<double> pos;
  for (const auto& x : at)
    for (int k = 0; k <= steps; ++k)
      for (int a = 0; a < dim; ++a) pos.push_back(x[a]);
  return PathEnsemble::from_positions(static_cast<int>(at.size()), beta, steps, dim, std::move(pos));
}

inline std::size_t node_at(const GridSpec& g, const Point& x) {
  bool clipped = false;
  return g.locate(x, clipped);
}

inline GridFunction zero_tilt(const GridSpec& g) { return GridFunction::constant(g, 0.0, FieldRole::tilt); }

inline GridFunction tilt_from(const GridSpec& g, const std::function<double(const Point&)>& fn) {
  return GridFunction::sample(g, fn, FieldRole::tilt);
}

inline double l1_distance(const DensityField& a, const DensityField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.grid().size(); ++i) s += a.grid().weight(i) * std::abs(a[i] - b[i]);
  return s;
}

}  // namespace hartree::testing
