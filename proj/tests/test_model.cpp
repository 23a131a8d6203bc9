#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mmloc/model.hpp"
#include "mmloc/rng.hpp"

using namespace mmloc;

TEST(SystemConfig, DerivedQuantitiesForDefaults) {
  const SystemConfig cfg;
  EXPECT_NEAR(cfg.lambda_c(), 0.041666666666666664, 1e-15);
  EXPECT_NEAR(cfg.R_s, 200.0, 1e-9);
  EXPECT_NEAR(cfg.R_srx, 208.33333333333334, 1e-9);
  EXPECT_NEAR(cfg.kappa(), kTwoPi / cfg.lambda_c(), 1e-9);
  EXPECT_DOUBLE_EQ(cfg.range_resolution(), 19.53125);
  EXPECT_DOUBLE_EQ(cfg.gamma(), 2.0 / (200.0 * 200.0));
  EXPECT_EQ(cfg.n_grid_nominal(), 1600);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(SystemConfig, NoiseVarianceMatchesSnrDefinition) {
  const SystemConfig cfg;
  for (double snr : {-10.0, 0.0, 5.0, 13.0, 30.0}) {
    const double lin = std::pow(10.0, snr / 10.0);
    EXPECT_NEAR(cfg.sigma2(snr) * lin * cfg.R_s * cfg.R_s / 2.0, 1.0, 1e-14) << snr;
  }
  EXPECT_DOUBLE_EQ(cfg.sigma2(0.0), 5e-5);
}

TEST(SystemConfig, ValidationNamesTheField) {
  auto expect_field = [](SystemConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL() << "expected ConfigError for " << field;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  SystemConfig c;
  c.R_s = c.R_srx;
  expect_field(c, "r_s");
  c = {};
  c.Q = 0;
  expect_field(c, "q");
  c = {};
  c.D = -1;
  expect_field(c, "d");
  c = {};
  c.A_srx = 7.0;
  expect_field(c, "a_srx");
  c = {};
  c.constellation = 8;
  expect_field(c, "constellation");
  c = {};
  c.constellation_orders = Array2<int>(3, 3, 16);
  expect_field(c, "constellation_map");
}

TEST(Constellation, FourQamPoints) {
  const Constellation c = make_qam_constellation(4);
  const double r = 1.0 / std::sqrt(2.0);
  ASSERT_EQ(c.points.size(), 4u);
  EXPECT_DOUBLE_EQ(c.energy_norm, 2.0);
  EXPECT_EQ(c.points[0], Complex(-r, -r));
  EXPECT_EQ(c.points[1], Complex(-r, r));
  EXPECT_EQ(c.points[2], Complex(r, -r));
  EXPECT_EQ(c.points[3], Complex(r, r));
}

TEST(Constellation, SixteenQamFirstPoint) {
  const Constellation c = make_qam_constellation(16);
  EXPECT_DOUBLE_EQ(c.energy_norm, 10.0);
  EXPECT_NEAR(std::abs(c.points[0] - Complex(-3.0, -3.0) / std::sqrt(10.0)), 0.0, 1e-15);
  EXPECT_EQ(c.side, 4);
}

TEST(Constellation, UnitMeanEnergyForAllOrders) {
  for (int m : {4, 16, 64, 256, 1024, 4096}) {
    const Constellation c = make_qam_constellation(m);
    double e = 0.0;
    for (const auto& s : c.points) e += std::norm(s);
    EXPECT_NEAR(e / m, 1.0, 1e-12) << m;
    EXPECT_DOUBLE_EQ(c.energy_norm, 2.0 * (m - 1) / 3.0);
  }
  const Constellation b = make_bpsk_constellation();
  EXPECT_EQ(b.points.size(), 2u);
  EXPECT_FALSE(b.is_qam);
}

TEST(Constellation, NonSquareOrderRejected) {
  EXPECT_THROW(make_qam_constellation(8), ConfigError);
  EXPECT_THROW(make_qam_constellation(32), ConfigError);
  EXPECT_THROW(make_qam_constellation(2), ConfigError);
}

TEST(ConstellationMap, MixedOrdersShareTable) {
  Array2<int> orders(2, 3, 16);
  orders(1, 2) = 256;
  orders(0, 1) = 2;
  const auto m = ConstellationMap::from_orders(orders);
  EXPECT_EQ(m.table().size(), 3u);
  EXPECT_EQ(m.at(0, 0).order, 16);
  EXPECT_EQ(m.at(1, 2).order, 256);
  EXPECT_EQ(m.at(0, 1).order, 2);
  EXPECT_FALSE(m.all_qam());
  EXPECT_EQ(m.max_order(), 256);
}

TEST(ResourceGrid, OnesPilotsGiveEnergyQ) {
  SystemConfig cfg;
  cfg.Q = 4;
  cfg.P = 1;
  cfg.D = 2;
  cfg.constellation = 4;
  cfg.pilot_scheme = PilotScheme::Ones;
  Rng rng = make_stream(3, Stream::Frame);
  const ResourceGrid g = build_resource_grid(cfg, rng);
  EXPECT_DOUBLE_EQ(g.pilot_energy, 4.0);
  for (const auto& x : g.X.flat()) EXPECT_EQ(x, Complex(1.0, 0.0));
}

TEST(ResourceGrid, RandomPilotsAreUnitModulus) {
  SystemConfig cfg;
  cfg.Q = 64;
  cfg.P = 3;
  cfg.D = 1;
  Rng rng = make_stream(5, Stream::Frame);
  const ResourceGrid g = build_resource_grid(cfg, rng);
  std::set<double> seen;
  for (const auto& x : g.X.flat()) {
    EXPECT_EQ(x.imag(), 0.0);
    EXPECT_EQ(std::abs(x.real()), 1.0);
    seen.insert(x.real());
  }
  EXPECT_EQ(seen.size(), 2u);
  EXPECT_DOUBLE_EQ(g.pilot_energy, 64.0 * 3.0);
}

TEST(ResourceGrid, EmptyDataBlock) {
  SystemConfig cfg;
  cfg.Q = 8;
  cfg.D = 0;
  Rng rng = make_stream(1, Stream::Frame);
  const ResourceGrid g = build_resource_grid(cfg, rng);
  EXPECT_EQ(g.S.rows(), 8u);
  EXPECT_EQ(g.S.cols(), 0u);
  EXPECT_TRUE(g.S.empty());
}

TEST(ResourceGrid, DataSymbolsBelongToTheirConstellation) {
  SystemConfig cfg;
  cfg.Q = 2;
  cfg.D = 1;
  cfg.constellation = 4;
  Rng rng = make_stream(11, Stream::Frame);
  const ResourceGrid g = build_resource_grid(cfg, rng);
  const auto pts = make_qam_constellation(4).points;
  for (const auto& s : g.S.flat()) EXPECT_NE(std::find(pts.begin(), pts.end(), s), pts.end());

  Array2<int> orders(6, 4, 64);
  orders(2, 3) = 2;
  cfg.Q = 6;
  cfg.D = 4;
  cfg.constellation_orders = orders;
  const ResourceGrid g2 = build_resource_grid(cfg, rng);
  for (int q = 0; q < 6; ++q) {
    for (int d = 0; d < 4; ++d) {
      const auto& c = g2.cmap->at(q, d);
      EXPECT_NE(std::find(c.points.begin(), c.points.end(), g2.S(q, d)), c.points.end());
    }
  }
}

TEST(ResourceGrid, ReproducibleFromSeed) {
  SystemConfig cfg;
  cfg.Q = 16;
  cfg.D = 5;
  Rng a = make_stream(42, Stream::Frame);
  Rng b = make_stream(42, Stream::Frame);
  const ResourceGrid ga = build_resource_grid(cfg, a);
  const ResourceGrid gb = build_resource_grid(cfg, b);
  EXPECT_EQ(ga.X, gb.X);
  EXPECT_EQ(ga.S, gb.S);
}

TEST(Scene, FourNodesOnFullCircle) {
  SystemConfig cfg;
  cfg.N = 4;
  cfg.R_srx = 100.0;
  cfg.R_s = 50.0;
  const auto nodes = make_node_positions(cfg);
  ASSERT_EQ(nodes.size(), 4u);
  const double expected[4][2] = {{100, 0}, {0, 100}, {-100, 0}, {0, -100}};
  for (int n = 0; n < 4; ++n) {
    EXPECT_NEAR(nodes[n].x, expected[n][0], 1e-12);
    EXPECT_NEAR(nodes[n].y, expected[n][1], 1e-12);
  }
}

TEST(Scene, HalfApertureSpacing) {
  SystemConfig cfg;
  cfg.N = 2;
  cfg.A_srx = kPi;
  const auto nodes = make_node_positions(cfg);
  const double gap = std::atan2(nodes[1].y, nodes[1].x) - std::atan2(nodes[0].y, nodes[0].x);
  EXPECT_NEAR(gap, kPi / 2.0, 1e-12);
}

TEST(Scene, UniformDiskMeanRadius) {
  SystemConfig cfg;
  Rng rng = make_stream(7, Stream::Scene);
  double sum = 0.0;
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    const Scene s = build_scene(cfg, rng);
    const double r = norm(s.ue_position);
    ASSERT_LE(r, cfg.R_s);
    sum += r;
  }
  EXPECT_NEAR(sum / kDraws / (2.0 / 3.0 * cfg.R_s), 1.0, 0.02);
}

TEST(Rng, StreamsAreDistinctAndRepeatable) {
  Rng a = make_stream(9, Stream::Noise);
  Rng b = make_stream(9, Stream::Noise);
  Rng c = make_stream(9, Stream::Scene);
  Rng d = make_stream(10, Stream::Noise);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
}
