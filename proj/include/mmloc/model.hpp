#pragma once

// Scenario configuration, QAM/BPSK constellations, the pilot/data resource
// grid and the receiver geometry.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmloc/rng.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

enum class PilotScheme { Random, Ones };

/// All scenario, waveform and solver parameters. Defaults reproduce the
/// reference simulation setup (7.2 GHz, 128 x 60 kHz, 1 pilot + 35 data
/// symbols, 5 nodes, 256-QAM).
struct SystemConfig {
  double f_c = 7.2e9;       // Hz
  double delta_f = 60e3;    // Hz
  int Q = 128;              // subcarriers
  int P = 1;                // pilot OFDM symbols
  int D = 35;               // data OFDM symbols
  int N = 5;                // receive nodes
  double R_srx = 5000.0 * kSpeedOfLight / 7.2e9;  // m
  double A_srx = kTwoPi;                          // rad
  double R_s = 4800.0 * kSpeedOfLight / 7.2e9;    // m
  int N_grid_per_axis = 40;
  int alpha_oversample = 4;
  std::vector<double> snr_db = {0, 5, 10, 15, 20, 25, 30};
  std::optional<double> gamma_override;  // channel prior variance; default 2 / R_s^2

  int constellation = 256;                           // uniform order when no map is given
  std::optional<Array2<int>> constellation_orders;   // Q x D per-cell orders
  PilotScheme pilot_scheme = PilotScheme::Random;

  int n_mc = 3000;
  std::uint64_t base_seed = 1;

  // Solver settings.
  int nm_max_iter = 200;
  double nm_tol = 1e-10;
  std::uint64_t enumeration_cap = 65536;
  bool fast_slicer = false;

  double lambda_c() const { return kSpeedOfLight / f_c; }
  double kappa() const { return kTwoPi / lambda_c(); }
  double bandwidth() const { return Q * delta_f; }
  double range_resolution() const { return kSpeedOfLight / (2.0 * bandwidth()); }
  double gamma() const { return gamma_override ? *gamma_override : 2.0 / (R_s * R_s); }
  /// Steering phase per metre per subcarrier index, kappa * delta_f / f_c.
  double phase_per_meter() const { return kTwoPi * delta_f / kSpeedOfLight; }
  long long n_grid_nominal() const {
    return static_cast<long long>(N_grid_per_axis) * N_grid_per_axis;
  }

  /// Noise variance giving the requested per-node average SNR.
  double sigma2(double snr_db_value) const {
    const double snr_linear = std::pow(10.0, snr_db_value / 10.0);
    return 2.0 / (R_s * R_s * snr_linear);
  }

  int order_at(int q, int d) const {
    return constellation_orders ? (*constellation_orders)(q, d) : constellation;
  }

  void validate() const;
};

inline bool is_power_of_four(int m) {
  if (m < 4) return false;
  while (m % 4 == 0) m /= 4;
  return m == 1;
}

inline void validate_order(int m, const std::string& field) {
  if (m != 2 && !is_power_of_four(m)) {
    throw ConfigError(field + ": constellation order " + std::to_string(m) +
                      " is neither 2 (BPSK) nor a square QAM order (4, 16, 64, ...)");
  }
}

inline void SystemConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(std::isfinite(f_c) && f_c > 0, "f_c: must be positive");
  require(std::isfinite(delta_f) && delta_f > 0, "delta_f: must be positive");
  require(Q >= 1, "q: must be >= 1");
  require(P >= 1, "p: must be >= 1");
  require(D >= 0, "d: must be >= 0");
  require(N >= 1, "n: must be >= 1");
  require(std::isfinite(R_srx) && R_srx > 0, "r_srx: must be positive");
  require(std::isfinite(R_s) && R_s > 0, "r_s: must be positive");
  require(R_s < R_srx, "r_s: scene radius must be strictly below r_srx");
  require(A_srx > 0 && A_srx <= kTwoPi + 1e-12, "a_srx: aperture must lie in (0, 2*pi]");
  require(N_grid_per_axis >= 1, "n_grid_per_axis: must be >= 1");
  require(alpha_oversample >= 1, "alpha_oversample: must be a positive integer");
  require(!snr_db.empty(), "snr_db: at least one SNR point is required");
  for (double s : snr_db) require(std::isfinite(s), "snr_db: values must be finite");
  require(gamma() > 0 && std::isfinite(gamma()), "gamma: must be positive");
  require(n_mc >= 1, "n_mc: must be >= 1");
  require(nm_max_iter >= 0, "nm_max_iter: must be >= 0");
  require(nm_tol >= 0, "nm_tol: must be >= 0");
  if (constellation_orders) {
    require(constellation_orders->rows() == static_cast<std::size_t>(Q) &&
                constellation_orders->cols() == static_cast<std::size_t>(D),
            "constellation_map: must be a q x d array");
    for (int m : constellation_orders->flat()) validate_order(m, "constellation_map");
  } else {
    validate_order(constellation, "constellation");
  }
}

// ---------------------------------------------------------------------------
// Constellations

struct Constellation {
  int order = 0;
  std::vector<Complex> points;
  double energy_norm = 1.0;  // E_M = 2 (M - 1) / 3 for QAM
  int side = 0;              // sqrt(M) for QAM, 0 for BPSK
  bool is_qam = false;
};

/// Square M-QAM, points ordered row-major in (r, i):
/// s_{r,i} = ((2r - sqrt(M) + 1) + j (2i - sqrt(M) + 1)) / sqrt(E_M).
inline Constellation make_qam_constellation(int M) {
  if (!is_power_of_four(M)) {
    throw ConfigError("constellation: QAM order " + std::to_string(M) + " is not a power of 4");
  }
  Constellation c;
  c.order = M;
  c.is_qam = true;
  c.side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(M))));
  c.energy_norm = 2.0 * (M - 1) / 3.0;
  const double scale = 1.0 / std::sqrt(c.energy_norm);
  c.points.reserve(M);
  for (int r = 0; r < c.side; ++r) {
    for (int i = 0; i < c.side; ++i) {
      c.points.emplace_back((2 * r - c.side + 1) * scale, (2 * i - c.side + 1) * scale);
    }
  }
  return c;
}

inline Constellation make_bpsk_constellation() {
  Constellation c;
  c.order = 2;
  c.points = {Complex(-1.0, 0.0), Complex(1.0, 0.0)};
  return c;
}

inline Constellation make_constellation(int M) {
  return M == 2 ? make_bpsk_constellation() : make_qam_constellation(M);
}

/// Per-cell constellation assignment c(q, d) over a table of distinct
/// constellations.
class ConstellationMap {
 public:
  ConstellationMap() = default;

  static ConstellationMap uniform(int order, int Q, int D) {
    Array2<int> orders(Q, D, order);
    return from_orders(orders);
  }

  static ConstellationMap from_orders(const Array2<int>& orders) {
    ConstellationMap m;
    m.index_ = Array2<std::uint16_t>(orders.rows(), orders.cols());
    for (std::size_t q = 0; q < orders.rows(); ++q) {
      for (std::size_t d = 0; d < orders.cols(); ++d) {
        const int order = orders(q, d);
        std::size_t id = 0;
        while (id < m.table_.size() && m.table_[id].order != order) ++id;
        if (id == m.table_.size()) m.table_.push_back(make_constellation(order));
        m.index_(q, d) = static_cast<std::uint16_t>(id);
      }
    }
    return m;
  }

  std::size_t Q() const { return index_.rows(); }
  std::size_t D() const { return index_.cols(); }
  std::size_t id(std::size_t q, std::size_t d) const { return index_(q, d); }
  const Constellation& at(std::size_t q, std::size_t d) const { return table_[index_(q, d)]; }
  const std::vector<Constellation>& table() const { return table_; }

  bool all_qam() const {
    for (const auto& c : table_) {
      if (!c.is_qam) return false;
    }
    return true;
  }

  int max_order() const {
    int m = 0;
    for (const auto& c : table_) m = std::max(m, c.order);
    return m;
  }

 private:
  std::vector<Constellation> table_;
  Array2<std::uint16_t> index_;
};

inline ConstellationMap make_constellation_map(const SystemConfig& cfg) {
  if (cfg.constellation_orders) return ConstellationMap::from_orders(*cfg.constellation_orders);
  return ConstellationMap::uniform(cfg.constellation, cfg.Q, cfg.D);
}

// ---------------------------------------------------------------------------
// Resource grid

struct ResourceGrid {
  Array2<Complex> X;  // Q x P pilots
  Array2<Complex> S;  // Q x D data
  std::shared_ptr<const ConstellationMap> cmap;
  double pilot_energy = 0.0;  // ||X||_F^2
};

inline double frobenius2(const Array2<Complex>& a) {
  double e = 0.0;
  for (const auto& v : a.flat()) e += std::norm(v);
  return e;
}

/// Draws BPSK pilots (i.i.d. +-1, or all ones) followed by uniform data
/// symbols; pilots are drawn first so they do not depend on the data map.
inline ResourceGrid build_resource_grid(const SystemConfig& cfg,
                                        std::shared_ptr<const ConstellationMap> cmap, Rng& rng) {
  ResourceGrid g;
  g.X = Array2<Complex>(cfg.Q, cfg.P, Complex(1.0, 0.0));
  if (cfg.pilot_scheme == PilotScheme::Random) {
    std::bernoulli_distribution coin(0.5);
    for (auto& x : g.X.flat()) x = coin(rng) ? Complex(1.0, 0.0) : Complex(-1.0, 0.0);
  }
  g.S = Array2<Complex>(cfg.Q, cfg.D);
  for (int q = 0; q < cfg.Q; ++q) {
    for (int d = 0; d < cfg.D; ++d) {
      const auto& c = cmap->at(q, d);
      std::uniform_int_distribution<int> pick(0, c.order - 1);
      g.S(q, d) = c.points[pick(rng)];
    }
  }
  g.cmap = std::move(cmap);
  g.pilot_energy = frobenius2(g.X);
  return g;
}

inline ResourceGrid build_resource_grid(const SystemConfig& cfg, Rng& rng) {
  return build_resource_grid(cfg, std::make_shared<const ConstellationMap>(make_constellation_map(cfg)),
                             rng);
}

// ---------------------------------------------------------------------------
// Scene

struct Scene {
  std::vector<Point2> node_positions;
  Point2 ue_position;
};

/// Nodes equi-angular on the receiver arc, first node at angle 0 and spacing
/// A_srx / N.
inline std::vector<Point2> make_node_positions(const SystemConfig& cfg) {
  std::vector<Point2> nodes;
  nodes.reserve(cfg.N);
  for (int n = 0; n < cfg.N; ++n) {
    const double angle = n * cfg.A_srx / cfg.N;
    nodes.push_back({cfg.R_srx * std::cos(angle), cfg.R_srx * std::sin(angle)});
  }
  return nodes;
}

inline Point2 draw_uniform_disk(double radius, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng));
  const double theta = kTwoPi * u(rng);
  return {r * std::cos(theta), r * std::sin(theta)};
}

inline Scene build_scene(const SystemConfig& cfg, Rng& rng) {
  return {make_node_positions(cfg), draw_uniform_disk(cfg.R_s, rng)};
}

}  // namespace mmloc
