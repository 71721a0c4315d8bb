#include <cmath>
#include <random>

#include "support.hpp"

using namespace hartree;
using hartree::testing::throws_kind;

TEST(MakeGrid, OneDimensionalNodes) {
  const auto g = make_grid(1, 5.0, 11);
  EXPECT_DOUBLE_EQ(g.spacing(), 1.0);
  ASSERT_EQ(g.size(), 11u);
  for (int i = 0; i < 11; ++i) EXPECT_DOUBLE_EQ(g.node(i)[0], -5.0 + i);
}

TEST(MakeGrid, NodeCounts) {
  EXPECT_EQ(make_grid(2, 4.0, 9).size(), 81u);
  EXPECT_DOUBLE_EQ(make_grid(2, 4.0, 9).spacing(), 1.0);
  // Seven points per axis is below the make_grid minimum; the kernel constructor builds the same lattice.
  EXPECT_EQ(GridSpec::kernel(3, 1.0, 3).size(), 343u);
  EXPECT_DOUBLE_EQ(GridSpec::kernel(3, 1.0, 3).half_width(), 3.0);
  EXPECT_EQ(make_grid(3, 3.0, 8).size(), 512u);
}

TEST(MakeGrid, CoordinatesSymmetric) {
  const auto g = make_grid(1, 3.7, 40);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(g.coordinate(i), -g.coordinate(39 - i));
}

TEST(MakeGrid, RowMajorAxisZeroSlowest) {
  const auto g = make_grid(2, 1.0, 9);
  EXPECT_DOUBLE_EQ(g.node(1)[0], -1.0);
  EXPECT_DOUBLE_EQ(g.node(1)[1], -0.75);
  EXPECT_DOUBLE_EQ(g.node(9)[0], -0.75);
}

TEST(MakeGrid, Errors) {
  EXPECT_TRUE(throws_kind([] { make_grid(0, 1.0, 11); }, ErrorKind::InvalidDimension));
  EXPECT_TRUE(throws_kind([] { make_grid(4, 1.0, 11); }, ErrorKind::InvalidDimension));
  EXPECT_TRUE(throws_kind([] { make_grid(1, 1.0, 7); }, ErrorKind::InvalidResolution));
  EXPECT_TRUE(throws_kind([] { make_grid(1, 0.0, 11); }, ErrorKind::InvalidResolution));
}

TEST(Quadrature, Examples) {
  // n = 3 is below the grid minimum, so use the kernel constructor for [-1, 1].
  const auto g3 = GridSpec::kernel(1, 1.0, 1);
  EXPECT_DOUBLE_EQ(quadrature(GridFunction::constant(g3, 1.0)), 2.0);
  const auto g = make_grid(1, 1.0, 21);
  EXPECT_DOUBLE_EQ(quadrature(GridFunction::constant(g, 1.0)), 2.0);
  EXPECT_EQ(quadrature(GridFunction::constant(g, 0.0)), 0.0);
  EXPECT_NEAR(quadrature(GridFunction::sample(g, [](const Point& x) { return x[0]; })), 0.0, 1e-15);
}

TEST(Quadrature, RejectsNonFinite) {
  const auto g = make_grid(1, 1.0, 11);
  auto f = GridFunction::constant(g, 1.0);
  f.mutable_values()[3] = std::numeric_limits<double>::infinity();
  EXPECT_TRUE(throws_kind([&] { quadrature(f); }, ErrorKind::NonFiniteValue));
  f.mutable_values()[3] = std::nan("");
  EXPECT_TRUE(throws_kind([&] { quadrature(f); }, ErrorKind::NonFiniteValue));
}

TEST(Quadrature, Linear) {
  const auto g = make_grid(2, 2.0, 17);
  std::mt19937_64 eng(3);
  std::normal_distribution<double> nd;
  std::vector<double> a(g.size()), b(g.size()), c(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    a[i] = nd(eng);
    b[i] = nd(eng);
  }
  const double s = 2.5, t = -0.75;
  for (std::size_t i = 0; i < g.size(); ++i) c[i] = s * a[i] + t * b[i];
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    ma = std::max(ma, std::abs(a[i]));
    mb = std::max(mb, std::abs(b[i]));
  }
  const double lhs = quadrature(GridFunction(g, c)) - s * quadrature(GridFunction(g, a)) -
                     t * quadrature(GridFunction(g, b));
  EXPECT_LE(std::abs(lhs), 1e-12 * (std::abs(s) + std::abs(t)) * std::max(ma, mb));
}

TEST(InnerProduct, Examples) {
  const auto g = make_grid(1, 1.0, 21);
  const auto one = GridFunction::constant(g, 1.0);
  EXPECT_DOUBLE_EQ(inner_product(one, one), 2.0);
  EXPECT_EQ(inner_product(one, GridFunction::constant(g, 0.0)), 0.0);

  // Indicators of the closed halves overlap only at the origin node.
  const auto left = GridFunction::sample(g, [](const Point& x) { return x[0] <= 0.0 ? 1.0 : 0.0; });
  const auto right = GridFunction::sample(g, [](const Point& x) { return x[0] >= 0.0 ? 1.0 : 0.0; });
  double direct = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) direct += g.weight(i) * left[i] * right[i];
  EXPECT_DOUBLE_EQ(inner_product(left, right), direct);
  EXPECT_LE(inner_product(left, right), g.spacing());
}

TEST(InnerProduct, SymmetricAndMismatch) {
  const auto g = make_grid(1, 1.0, 21);
  const auto f = GridFunction::sample(g, [](const Point& x) { return std::sin(3 * x[0]) + x[0]; });
  const auto h = GridFunction::sample(g, [](const Point& x) { return std::exp(x[0]); });
  EXPECT_EQ(inner_product(f, h), inner_product(h, f));
  const auto other = make_grid(1, 1.0, 23);
  EXPECT_TRUE(throws_kind([&] { inner_product(f, GridFunction::constant(other, 1.0)); }, ErrorKind::GridMismatch));
}

TEST(Normalize, UnitMassAndIdempotent) {
  const auto g = make_grid(2, 3.0, 31);
  const auto f = GridFunction::sample(g, [](const Point& x) { return std::exp(-x[0] * x[0] - 0.5 * x[1] * x[1]); },
                                      FieldRole::density);
  const auto n1 = normalize(f);
  EXPECT_NEAR(quadrature(n1), 1.0, 1e-10);
  const auto n2 = normalize(n1);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(n1[i], n2[i]);
  EXPECT_TRUE(throws_kind([&] { normalize(GridFunction::constant(g, 0.0)); }, ErrorKind::NonPositiveMass));
}

TEST(DensityField, RejectsNegative) {
  const auto g = make_grid(1, 1.0, 11);
  std::vector<double> v(g.size(), 1.0);
  v[2] = -1e-3;
  EXPECT_ANY_THROW(DensityField(g, v));
  std::vector<double> w(g.size(), 1.0);
  w[4] = std::numeric_limits<double>::infinity();
  EXPECT_TRUE(throws_kind([&] { GridFunction(g, w, FieldRole::tilt); }, ErrorKind::NonFiniteValue));
  EXPECT_NO_THROW(GridFunction(g, w, FieldRole::potential));
}

TEST(Convolve, OneCellPointMassIsIdentity) {
  const auto g = make_grid(1, 4.0, 41);
  const auto f = GridFunction::sample(g, [](const Point& x) { return std::exp(-x[0] * x[0]); });
  const auto k = GridSpec::kernel(1, g.spacing(), 2);
  std::vector<double> delta(k.size(), 0.0);
  delta[k.center_index()] = 1.0 / g.spacing();
  const auto out = convolve(f, GridFunction(k, delta));
  // Boundary nodes carry half a trapezoid cell.
  for (std::size_t i = 1; i + 1 < g.size(); ++i) EXPECT_NEAR(out[i], f[i], 1e-14);
  EXPECT_NEAR(out[0], 0.5 * f[0], 1e-14);
}

TEST(Convolve, MassPreserving) {
  const auto g = make_grid(2, 5.0, 51);
  const auto rho = normalize(GridFunction::sample(
      g, [](const Point& x) { return std::exp(-2.0 * (x[0] * x[0] + x[1] * x[1])); }, FieldRole::density));
  const auto kappa = make_mollifier(0.8, g);
  const auto out = convolve(rho, kappa.kernel);
  EXPECT_NEAR(quadrature(out), 1.0, 1e-8);
}

TEST(Convolve, TwoBoxesMakeHat) {
  const auto g = make_grid(1, 5.0, 51);
  const double h = g.spacing();
  const auto box = GridFunction::sample(g, [](const Point& x) { return std::abs(x[0]) <= 1.0 + 1e-9 ? 1.0 : 0.0; });
  const int m = static_cast<int>(std::round(1.0 / h));
  const auto kg = GridSpec::kernel(1, h, m);
  const auto kbox = GridFunction::constant(kg, 1.0);
  const auto out = convolve(box, kbox, ConvolutionMethod::direct);
  // Brute force: sum_j w_j box(x_j) kbox(x_i - x_j).
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const int off = static_cast<int>(i) - static_cast<int>(j);
      if (std::abs(off) <= m) s += g.weight(j) * box[j];
    }
    EXPECT_NEAR(out[i], s, 1e-12) << i;
  }
  const std::size_t c = g.size() / 2;
  EXPECT_NEAR(out[c], (2 * m + 1) * h, 1e-12);
  EXPECT_GT(out[c], out[c + 5]);
}

TEST(Convolve, SpectralMatchesDirect) {
  const auto g = make_grid(2, 3.0, 25);
  const auto f = GridFunction::sample(g, [](const Point& x) { return std::cos(x[0]) * std::exp(-x[1] * x[1]) + 0.1 * x[0]; });
  const auto kappa = make_mollifier(0.9, g);
  const auto a = convolve(f, kappa.kernel, ConvolutionMethod::direct);
  const auto b = convolve(f, kappa.kernel, ConvolutionMethod::spectral);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Convolve, Commutative) {
  // Two kernel-grid functions: f * g and g * f agree when both fit in the box.
  const auto k = GridSpec::kernel(1, 0.25, 12);
  const auto f = GridFunction::sample(k, [](const Point& x) { return std::max(0.0, 1.0 - std::abs(x[0])); });
  const auto g = GridFunction::sample(k, [](const Point& x) { return std::max(0.0, 1.0 - std::abs(x[0] - 0.5) * 2); });
  const auto fg = convolve(f, restrict_to_kernel(g, 6), ConvolutionMethod::direct);
  const auto gf = convolve(g, restrict_to_kernel(f, 6), ConvolutionMethod::direct);
  for (std::size_t i = 0; i < k.size(); ++i) EXPECT_NEAR(fg[i], gf[i], 1e-10);
}

TEST(Convolve, Errors) {
  const auto g = make_grid(1, 2.0, 21);
  const auto f = GridFunction::constant(g, 1.0);
  EXPECT_TRUE(throws_kind([&] { convolve(f, GridFunction::constant(GridSpec::kernel(1, 0.3, 2), 1.0)); },
                          ErrorKind::GridMismatch));
  EXPECT_TRUE(throws_kind([&] { convolve(f, GridFunction::constant(GridSpec::kernel(1, g.spacing(), 30), 1.0)); },
                          ErrorKind::KernelTooWide));
}
