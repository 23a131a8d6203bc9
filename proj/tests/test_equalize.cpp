#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mmloc/channel.hpp"
#include "mmloc/equalize.hpp"

using namespace mmloc;

namespace {

struct Frame {
  SystemConfig cfg;
  ChannelRealization ch;
  ResourceGrid grid;
  Observations obs;
};

Frame make_frame(double sigma2, int Q = 8, int P = 2, int D = 4, int M = 16, std::uint64_t seed = 1) {
  Frame f;
  f.cfg.Q = Q;
  f.cfg.P = P;
  f.cfg.D = D;
  f.cfg.N = 3;
  f.cfg.constellation = M;
  Rng s = make_stream(seed, Stream::Scene);
  Rng c = make_stream(seed, Stream::Channel);
  Rng g = make_stream(seed, Stream::Frame);
  Rng n = make_stream(seed, Stream::Noise);
  f.ch = synthesize_channel(build_scene(f.cfg, s), f.cfg, c);
  f.grid = build_resource_grid(f.cfg, g);
  f.obs = observe(f.ch, f.grid, sigma2, n);
  return f;
}

void expect_close(const Array2<Complex>& a, const Array2<Complex>& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::abs(a.flat()[i] - b.flat()[i]), 0.0, tol) << i;
}

}  // namespace

TEST(PilotEqualize, OnesPilotIsIdentity) {
  Array3<Complex> y(2, 3, 1);
  for (std::size_t i = 0; i < y.size(); ++i) y.flat()[i] = Complex(i, -2.0 * i);
  const Array2<Complex> X(3, 1, Complex(1.0, 0.0));
  const Array2<Complex> e = pilot_equalize(y, X);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t q = 0; q < 3; ++q) EXPECT_EQ(e(n, q), y(n, q, 0));
  }
}

TEST(PilotEqualize, SignedSum) {
  Array3<Complex> y(1, 1, 2);
  y(0, 0, 0) = Complex(3.0, 1.0);
  y(0, 0, 1) = Complex(-1.0, 2.0);
  Array2<Complex> X(1, 2);
  X(0, 0) = 1.0;
  X(0, 1) = -1.0;
  EXPECT_EQ(pilot_equalize(y, X)(0, 0), Complex(4.0, -1.0));
}

TEST(PilotEqualize, NoiseFreeGivesPTimesH) {
  const Frame f = make_frame(0.0, 8, 3);
  const Array2<Complex> e = pilot_equalize(f.obs.y_pilot, f.grid.X);
  Array2<Complex> expected = f.ch.H;
  for (auto& v : expected.flat()) v *= 3.0;
  expect_close(e, expected, 1e-15);
}

TEST(GenieEqualize, EmptyDataLeavesPilotPart) {
  const Frame f = make_frame(0.1, 8, 1, 0);
  const Array2<Complex> yp = pilot_equalize(f.obs.y_pilot, f.grid.X);
  EXPECT_EQ(genie_equalize(yp, f.obs.y_data, f.grid.S), yp);
  EXPECT_EQ(dd_equalize(yp, f.obs.y_data, f.grid.S), yp);
}

TEST(GenieEqualize, NoiseFreeExpansion) {
  const Frame f = make_frame(0.0, 8, 2, 5, 64);
  const Array2<Complex> yp = pilot_equalize(f.obs.y_pilot, f.grid.X);
  const Array2<Complex> y = genie_equalize(yp, f.obs.y_data, f.grid.S);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t q = 0; q < 8; ++q) {
      double energy = 0.0;
      for (std::size_t p = 0; p < 2; ++p) energy += std::norm(f.grid.X(q, p));
      for (std::size_t d = 0; d < 5; ++d) energy += std::norm(f.grid.S(q, d));
      EXPECT_NEAR(std::abs(y(n, q) - f.ch.H(n, q) * energy), 0.0, 1e-14);
    }
  }
}

TEST(DdEqualize, PerfectDecisionsMatchGenieBitForBit) {
  const Frame f = make_frame(0.05);
  const Array2<Complex> yp = pilot_equalize(f.obs.y_pilot, f.grid.X);
  EXPECT_EQ(dd_equalize(yp, f.obs.y_data, f.grid.S), genie_equalize(yp, f.obs.y_data, f.grid.S));
  Array3<Complex> tensor(3, f.grid.S.rows(), f.grid.S.cols());
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t q = 0; q < f.grid.S.rows(); ++q) {
      for (std::size_t d = 0; d < f.grid.S.cols(); ++d) tensor(n, q, d) = f.grid.S(q, d);
    }
  }
  EXPECT_EQ(dd_equalize(yp, f.obs.y_data, tensor), genie_equalize(yp, f.obs.y_data, f.grid.S));
}

TEST(DdEqualize, ZeroSoftEstimatesContributeNothing) {
  const Frame f = make_frame(0.05);
  const Array2<Complex> yp = pilot_equalize(f.obs.y_pilot, f.grid.X);
  const Array2<Complex> zero(f.grid.S.rows(), f.grid.S.cols());
  EXPECT_EQ(dd_equalize(yp, f.obs.y_data, zero), yp);
}

TEST(ChannelLmmse, NoiseFreeRecoversChannel) {
  const Frame f = make_frame(0.0, 8, 2);
  expect_close(estimate_channel_lmmse(f.obs.y_pilot, f.grid.X, 0.0, 1.0), f.ch.H, 1e-15);
}

TEST(ChannelLmmse, ShrinksTowardZeroAndZeroInput) {
  Array3<Complex> y(1, 1, 1, Complex(2.0, 0.0));
  const Array2<Complex> X(1, 1, Complex(1.0, 0.0));
  EXPECT_NEAR(estimate_channel_lmmse(y, X, 1.0, 1.0)(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(estimate_channel_lmmse(y, X, 1e-12, 1.0)(0, 0).real(), 2.0, 1e-11);
  Array3<Complex> zero(2, 3, 1);
  const Array2<Complex> X3(3, 1, Complex(-1.0, 0.0));
  const Array2<Complex> h = estimate_channel_lmmse(zero, X3, 0.3, 0.7);
  for (const auto& v : h.flat()) EXPECT_EQ(v, Complex{});
}

TEST(SoftData, NoiseFreePerfectChannelRecoversSymbols) {
  const Frame f = make_frame(0.0, 8, 1, 4, 256);
  DataEstimates est;
  soft_data_estimate(f.ch.H, f.obs.y_data, 0.0, DemodMode::Centralized, est);
  soft_data_estimate(f.ch.H, f.obs.y_data, 0.0, DemodMode::Distributed, est);
  expect_close(est.soft_centr, f.grid.S, 1e-12);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t q = 0; q < 8; ++q) {
      for (std::size_t d = 0; d < 4; ++d) EXPECT_NEAR(std::abs(est.soft_distr(n, q, d) - f.grid.S(q, d)), 0.0, 1e-12);
    }
  }
}

TEST(SoftData, ZeroObservationsGiveZero) {
  const Array2<Complex> h(2, 3, Complex(0.5, 0.5));
  const Array3<Complex> y(2, 3, 4);
  DataEstimates est;
  soft_data_estimate(h, y, 0.1, DemodMode::Centralized, est);
  for (const auto& v : est.soft_centr.flat()) EXPECT_EQ(v, Complex{});
}

TEST(SoftData, DeadNodeCentralizedEqualsSurvivor) {
  const Frame f = make_frame(0.02, 8, 1, 3);
  Array2<Complex> h(2, 8);
  Array3<Complex> y(2, 8, 3);
  for (std::size_t q = 0; q < 8; ++q) {
    h(0, q) = f.ch.H(0, q);
    for (std::size_t d = 0; d < 3; ++d) {
      y(0, q, d) = f.obs.y_data(0, q, d);
      y(1, q, d) = f.obs.y_data(1, q, d);
    }
  }
  DataEstimates est;
  soft_data_estimate(h, y, 0.02, DemodMode::Centralized, est);
  soft_data_estimate(h, y, 0.02, DemodMode::Distributed, est);
  for (std::size_t q = 0; q < 8; ++q) {
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(std::abs(est.soft_centr(q, d) - est.soft_distr(0, q, d)), 0.0, 1e-15);
  }
}

TEST(HardDecision, NearestQuadrant) {
  const Constellation c = make_qam_constellation(4);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_EQ(c.points[nearest_point_index(c, {0.1, 0.9})], Complex(r, r));
  EXPECT_EQ(slice_point_index(c, {0.1, 0.9}), nearest_point_index(c, {0.1, 0.9}));
}

TEST(HardDecision, FixedPointsAndTieBreak) {
  const Constellation c = make_qam_constellation(16);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    EXPECT_EQ(nearest_point_index(c, c.points[i]), i);
    EXPECT_EQ(slice_point_index(c, c.points[i]), i);
  }
  const std::size_t tie = nearest_point_index(c, {0.0, 0.0});
  EXPECT_NEAR(std::abs(c.points[tie] - Complex(-1.0, -1.0) / std::sqrt(10.0)), 0.0, 1e-15);
  EXPECT_EQ(slice_point_index(c, {0.0, 0.0}), tie);
}

TEST(HardDecision, SlicerAgreesWithExhaustiveSearch) {
  Rng rng = make_stream(3, Stream::Oracle);
  std::uniform_real_distribution<double> u(-1.6, 1.6);
  for (int m : {4, 16, 64, 256}) {
    const Constellation c = make_qam_constellation(m);
    for (int t = 0; t < 2000; ++t) {
      const Complex v(u(rng), u(rng));
      EXPECT_EQ(slice_point_index(c, v), nearest_point_index(c, v)) << m;
    }
  }
}

TEST(HardDecision, OutputsAreConstellationMembersAndCounted) {
  const Frame f = make_frame(0.5, 8, 1, 4, 64);
  DataEstimates est;
  soft_data_estimate(f.ch.H, f.obs.y_data, 0.5, DemodMode::Distributed, est);
  const auto cmap = make_constellation_map(f.cfg);
  OpCounter ops;
  const Array3<Complex> hard = hard_decision(est.soft_distr, cmap, false, &ops);
  const auto& pts = cmap.at(0, 0).points;
  for (const auto& v : hard.flat()) EXPECT_NE(std::find(pts.begin(), pts.end(), v), pts.end());
  EXPECT_EQ(ops.hard_decision, 3u * 8u * 4u * 64u);
}

TEST(Metrics, SerAndMae) {
  Array2<Complex> truth(1, 4, Complex(1.0, 0.0));
  Array2<Complex> hard = truth;
  hard(0, 2) = Complex(-1.0, 0.0);
  EXPECT_DOUBLE_EQ(symbol_error_rate(hard, truth), 0.25);
  Array2<Complex> soft = truth;
  soft(0, 1) = Complex(1.0, 0.4);
  EXPECT_DOUBLE_EQ(mean_abs_error(soft, truth), 0.1);

  Array3<Complex> hard3(2, 1, 4, Complex(1.0, 0.0));
  hard3(0, 0, 0) = Complex(-1.0, 0.0);
  hard3(1, 0, 1) = Complex(-1.0, 0.0);
  hard3(1, 0, 2) = Complex(-1.0, 0.0);
  EXPECT_DOUBLE_EQ(symbol_error_rate(hard3, truth), 3.0 / 8.0);
}

TEST(Metrics, CentralizedSerNotWorseThanDistributed) {
  double centr = 0.0;
  double distr = 0.0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Frame f = make_frame(0.0, 16, 1, 4, 16, seed);
    const double sigma2 = f.cfg.sigma2(15.0);
    f.obs = [&] {
      Rng n = make_stream(seed, Stream::Noise);
      return observe(f.ch, f.grid, sigma2, n);
    }();
    const auto cmap = make_constellation_map(f.cfg);
    const Array2<Complex> h = estimate_channel_lmmse(f.obs.y_pilot, f.grid.X, sigma2, f.cfg.gamma());
    DataEstimates est;
    soft_data_estimate(h, f.obs.y_data, sigma2, DemodMode::Centralized, est);
    soft_data_estimate(h, f.obs.y_data, sigma2, DemodMode::Distributed, est);
    centr += symbol_error_rate(hard_decision(est.soft_centr, cmap), f.grid.S);
    distr += symbol_error_rate(hard_decision(est.soft_distr, cmap), f.grid.S);
  }
  EXPECT_LE(centr, distr);
}
