#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "mmloc/config.hpp"

using namespace mmloc;
using nlohmann::json;

TEST(Config, EmptyObjectGivesDefaults) {
  const SystemConfig c = config_from_json(json::object());
  const SystemConfig d;
  EXPECT_EQ(c.Q, d.Q);
  EXPECT_EQ(c.D, d.D);
  EXPECT_EQ(c.snr_db, d.snr_db);
  EXPECT_DOUBLE_EQ(c.R_s, d.R_s);
}

TEST(Config, RoundTrip) {
  SystemConfig c;
  c.Q = 32;
  c.delta_f = 240e3;
  c.D = 8;
  c.constellation = 16;
  c.gamma_override = 0.25;
  c.snr_db = {0, 7.5};
  c.pilot_scheme = PilotScheme::Ones;
  Array2<int> orders(32, 8);
  for (std::size_t i = 0; i < orders.size(); ++i) orders.flat()[i] = i % 2 ? 16 : 256;
  c.constellation_orders = orders;
  const SystemConfig r = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(r).dump(), config_to_json(c).dump());
  EXPECT_EQ(r.order_at(0, 0), 256);
  EXPECT_EQ(r.order_at(0, 1), 16);
  EXPECT_EQ(r.pilot_scheme, PilotScheme::Ones);
}

TEST(Config, UnknownKeyNamesTheKey) {
  try {
    config_from_json(json{{"subcarriers", 64}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("subcarriers"), std::string::npos);
  }
}

TEST(Config, InvalidValueNamesTheField) {
  try {
    config_from_json(json{{"q", 0}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("q"), std::string::npos);
  }
  EXPECT_THROW(config_from_json(json{{"q", "many"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"constellation", 8}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"pilot_scheme", "zadoff"}}), ConfigError);
}

TEST(Config, SnrForms) {
  EXPECT_EQ(config_from_json(json{{"snr_db", 12}}).snr_db, std::vector<double>{12.0});
  EXPECT_EQ(config_from_json(json{{"snr_db", {0, 30}}}).snr_db, (std::vector<double>{0.0, 30.0}));
  const auto r = config_from_json(json{{"snr_db", {{"start", 0}, {"stop", 30}, {"step", 5}}}}).snr_db;
  EXPECT_EQ(r, (std::vector<double>{0, 5, 10, 15, 20, 25, 30}));
  EXPECT_THROW(config_from_json(json{{"snr_db", {{"start", 0}, {"stop", 30}, {"step", 0}}}}), ConfigError);
}

TEST(Config, WavelengthUnits) {
  const SystemConfig c = config_from_json(json{{"r_srx_lambda", 5000}, {"r_s_lambda", 4800}});
  EXPECT_NEAR(c.R_srx, 5000.0 * 0.3 / 7.2, 1e-9);
  EXPECT_NEAR(c.R_s, 200.0, 1e-9);
  EXPECT_THROW(config_from_json(json{{"r_s", 100}, {"r_s_lambda", 10}}), ConfigError);
}

TEST(Config, LoadsBareFileAndManifest) {
  const std::string bare = testing::TempDir() + "mmloc_bare.json";
  const std::string manifest = testing::TempDir() + "mmloc_manifest.json";
  std::ofstream(bare) << R"({"q": 16, "d": 2})";
  SystemConfig c;
  c.Q = 16;
  c.D = 2;
  std::ofstream(manifest) << json{{"config", config_to_json(c)}, {"estimators", "P"}}.dump();
  EXPECT_EQ(load_config(bare).Q, 16);
  EXPECT_EQ(load_config(manifest).D, 2);
  EXPECT_THROW(load_config(testing::TempDir() + "does_not_exist.json"), ConfigError);
  std::ofstream(bare) << "{ not json";
  EXPECT_THROW(load_config(bare), ConfigError);
  std::remove(bare.c_str());
  std::remove(manifest.c_str());
}
