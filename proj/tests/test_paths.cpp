#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>
#include <sstream>

#include "support.hpp"

using namespace hartree;
using hartree::testing::frozen;
using hartree::testing::throws_kind;

TEST(SamplePaths, PointStartIsExact) {
  const auto e = sample_paths(1, 1.0, 1.0 / 64, InitialDistribution::point(), 2, 7, 0);
  EXPECT_EQ(e.position(0, 0)[0], 0.0);
  EXPECT_EQ(e.position(0, 0)[1], 0.0);
  EXPECT_EQ(e.steps(), 64);
  ASSERT_EQ(e.positions().size(), 65u * 2u);
}

TEST(SamplePaths, Deterministic) {
  const auto init = InitialDistribution::gaussian({0.5, 0, 0}, 0.3);
  const auto a = sample_paths(4, 0.5, 1.0 / 128, init, 3, 42, 9);
  const auto b = sample_paths(4, 0.5, 1.0 / 128, init, 3, 42, 9);
  ASSERT_EQ(a.positions().size(), b.positions().size());
  EXPECT_EQ(std::memcmp(a.positions().data(), b.positions().data(), a.positions().size() * sizeof(double)), 0);
  const auto c = sample_paths(4, 0.5, 1.0 / 128, init, 3, 42, 10);
  EXPECT_NE(a.positions()[5], c.positions()[5]);
  const auto d = sample_paths(4, 0.5, 1.0 / 128, init, 3, 43, 9);
  EXPECT_NE(a.positions()[5], d.positions()[5]);
}

TEST(SamplePaths, StreamsIndependentOfN) {
  // Path i of replica r uses its own stream, so adding paths leaves earlier ones unchanged.
  const auto a = sample_paths(2, 1.0, 1.0 / 32, InitialDistribution::point(), 2, 5, 3);
  const auto b = sample_paths(5, 1.0, 1.0 / 32, InitialDistribution::point(), 2, 5, 3);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k <= 32; ++k) EXPECT_EQ(a.position(i, k), b.position(i, k));
}

TEST(SamplePaths, EndpointVariance) {
  // One path per replica with one stream each; 1e5 endpoints.
  const int M = 100000;
  double s = 0.0, s2 = 0.0;
  const auto e = sample_paths(M, 1.0, 1.0 / 16, InitialDistribution::point(), 1, 2024, 0);
  for (int i = 0; i < M; ++i) {
    const double x = e.position(i, 16)[0];
    s += x;
    s2 += x * x;
  }
  const double var = s2 / M - (s / M) * (s / M);
  // Var of a sample variance of N(0, 2): 2 sigma^4 / M.
  const double se = std::sqrt(2.0 * 4.0 / M);
  EXPECT_NEAR(var, 2.0, 3.0 * se);
}

TEST(SamplePaths, CharacteristicFunction) {
  const int M = 100000;
  const auto e = sample_paths(M, 1.0, 1.0 / 16, InitialDistribution::point(), 2, 77, 1);
  for (double th : {0.2, 0.5, 0.8, 1.1, 1.5}) {
    const double theta[2] = {th, -0.5 * th};
    const double t2 = theta[0] * theta[0] + theta[1] * theta[1];
    std::complex<double> phi = 0.0;
    double re2 = 0.0;
    for (int i = 0; i < M; ++i) {
      const auto x = e.position(i, 16);
      const double arg = theta[0] * x[0] + theta[1] * x[1];
      phi += std::polar(1.0, arg);
      re2 += std::cos(arg) * std::cos(arg);
    }
    phi /= static_cast<double>(M);
    const double expected = std::exp(-t2);  // exp(-|theta|^2 * beta) for variance 2 beta
    const double se = std::sqrt(std::max(re2 / M - phi.real() * phi.real(), 1e-12) / M);
    EXPECT_NEAR(phi.real(), expected, 4.0 * se + 1e-12) << th;
    EXPECT_NEAR(phi.imag(), 0.0, 4.0 * std::sqrt(0.5 / M)) << th;
  }
}

TEST(SamplePaths, Errors) {
  const auto init = InitialDistribution::point();
  EXPECT_TRUE(throws_kind([&] { sample_paths(1, 1.0, 0.0, init, 1, 1, 0); }, ErrorKind::InvalidTimeStep));
  EXPECT_TRUE(throws_kind([&] { sample_paths(1, 1.0, 1.0 / 8, init, 1, 1, 0); }, ErrorKind::InvalidTimeStep));
  EXPECT_NO_THROW(sample_paths(1, 1.0, 1.0 / 16, init, 1, 1, 0));
  EXPECT_ANY_THROW(sample_paths(0, 1.0, 1.0 / 16, init, 1, 1, 0));
}

TEST(InitialDistribution, BoxSupport) {
  const auto box = TrapSpec::box(1.0);
  EXPECT_NO_THROW(InitialDistribution::point({0.5, 0, 0}).validate(box, 2));
  EXPECT_TRUE(throws_kind([&] { InitialDistribution::point({1.0, 0, 0}).validate(box, 2); }, ErrorKind::InfeasibleInit));
  EXPECT_TRUE(throws_kind([&] { InitialDistribution::uniform_box(0.6, {0.5, 0, 0}).validate(box, 1); },
                          ErrorKind::InfeasibleInit));
  EXPECT_TRUE(throws_kind([&] { InitialDistribution::gaussian({0, 0, 0}, 0.1).validate(box, 1); },
                          ErrorKind::InfeasibleInit));
  EXPECT_NO_THROW(InitialDistribution::gaussian({0, 0, 0}, 0.1).validate(TrapSpec::harmonic(1), 1));
}

TEST(Occupation, FrozenPathIsPointMass) {
  const auto g = make_grid(1, 2.0, 21);
  const auto e = frozen({{0.4, 0, 0}}, 1);
  const auto m = occupation_measure(e, 0, g);
  bool clipped = false;
  const std::size_t node = g.locate({0.4, 0, 0}, clipped);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(m.density[i] > 0.0, i == node);
  EXPECT_NEAR(m.density[node], 1.0 / g.spacing(), 1e-12);
  EXPECT_EQ(m.clipped, 0u);
}

TEST(Occupation, MassOne) {
  const auto g = make_grid(2, 3.0, 31);
  const auto e = sample_paths(5, 2.0, 1.0 / 64, InitialDistribution::uniform_box(0.5), 2, 3, 0);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(quadrature(occupation_measure(e, i, g).density), 1.0, 1e-10);
  EXPECT_NEAR(quadrature(mean_occupation(e, g)), 1.0, 1e-10);
  EXPECT_TRUE(throws_kind([&] { occupation_measure(e, 5, g); }, ErrorKind::IndexOutOfRange));
  EXPECT_TRUE(throws_kind([&] { occupation_measure(e, -1, g); }, ErrorKind::IndexOutOfRange));
}

TEST(Occupation, ClippedPathsStillHaveMassOne) {
  const auto g = make_grid(1, 1.0, 11);
  const auto e = frozen({{3.0, 0, 0}}, 1);
  const auto m = occupation_measure(e, 0, g);
  EXPECT_NEAR(quadrature(m.density), 1.0, 1e-10);
  EXPECT_EQ(m.clipped, 17u);
  EXPECT_EQ(count_clipped(e, g), 17u);
}

TEST(Occupation, OriginCellMatchesHeatKernel) {
  // E[density at the origin cell] against (1/beta) int_0^beta P(|B_s| < h/2) / h ds.
  const double beta = 0.25, dt = beta / 256;
  const auto g = make_grid(1, 5.0, 201);
  const double h = g.spacing();
  const int M = 20000;
  const auto e = sample_paths(M, beta, dt, InitialDistribution::point(), 1, 99, 0);
  const auto mean = mean_occupation(e, g);
  const std::size_t c = 100;
  // Oracle on the same time trapezoid; the s = 0 node carries the full cell.
  const auto tw = time_weights(256, dt);
  double oracle = 0.0;
  for (int k = 0; k <= 256; ++k) {
    const double s = k * dt;
    const double p = k == 0 ? 1.0 : std::erf(0.5 * h / std::sqrt(4.0 * s));
    oracle += tw[k] * p / h;
  }
  oracle /= beta;
  EXPECT_NEAR(mean[c], oracle, 0.05 * oracle);
}

TEST(Occupation, MeanOfIdenticalAndPermuted) {
  const auto g = make_grid(2, 2.0, 21);
  const auto one = frozen({{0.3, -0.2, 0}}, 2);
  const auto two = frozen({{0.3, -0.2, 0}, {0.3, -0.2, 0}}, 2);
  const auto a = mean_occupation(one, g), b = mean_occupation(two, g);
  const auto o = occupation_measure(one, 0, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-12);
    EXPECT_EQ(a[i], o.density[i]);
  }
  const auto p = frozen({{0.3, -0.2, 0}, {-1.0, 1.0, 0}}, 2);
  const auto q = frozen({{-1.0, 1.0, 0}, {0.3, -0.2, 0}}, 2);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(occupation_measure(p, 0, g).density[i], occupation_measure(q, 1, g).density[i]);
    EXPECT_NEAR(mean_occupation(p, g)[i], mean_occupation(q, g)[i], 1e-12);
  }
}

TEST(Occupation, NoClippingAtDefaults) {
  const double beta = 1.0;
  const auto g = make_grid(2, 6.0 * std::sqrt(beta), 61);
  std::size_t clipped = 0, total = 0;
  for (int r = 0; r < 50; ++r) {
    const auto e = sample_paths(4, beta, 1.0 / 64, InitialDistribution::point(), 2, 8, r);
    clipped += count_clipped(e, g);
    total += 4 * 65;
  }
  EXPECT_LT(static_cast<double>(clipped) / total, 1e-3);
}

TEST(Paths, TrapezoidTimeWeights) {
  const auto w = time_weights(8, 0.125);
  double s = 0.0;
  for (double x : w) s += x;
  EXPECT_DOUBLE_EQ(s, 1.0);
  EXPECT_DOUBLE_EQ(w.front(), 0.0625);
  EXPECT_EQ(time_steps(1.0, 1.0 / 64), 64);
}

TEST(Paths, CsvDump) {
  const auto e = frozen({{1.0, 2.0, 0}}, 2, 1.0, 16);
  std::ostringstream os;
  write_paths_csv(os, e);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("replica,path,step,x0,x1", 0), 0u);
  EXPECT_NE(s.find("0,0,16,1,2"), std::string::npos);
}
