#pragma once

// Near-field steering matrix, line-of-sight channel synthesis and noisy
// frequency-domain observations of the pilot and data blocks.

#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "mmloc/model.hpp"
#include "mmloc/rng.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

/// Fills row[q] = exp(-j * phase_per_meter * dist * q) for q = 0..Q-1.
/// Uses a rotation recurrence re-anchored on an exact phasor every 16
/// entries, which keeps |row[q]| within a few ulps of 1.
inline void steering_row(double dist, double phase_per_meter, std::span<Complex> row) {
  constexpr std::size_t kAnchor = 16;
  const double step = phase_per_meter * dist;
  const Complex rot = std::polar(1.0, -step);
  for (std::size_t q = 0; q < row.size(); ++q) {
    row[q] = (q % kAnchor == 0) ? std::polar(1.0, -step * static_cast<double>(q)) : row[q - 1] * rot;
  }
}

/// A(p)[n, q] = exp(-j kappa ||p - p_n|| q delta_f / f_c), an N x Q matrix.
inline Array2<Complex> steering_matrix(Point2 candidate, std::span<const Point2> nodes,
                                       const SystemConfig& cfg) {
  Array2<Complex> a(nodes.size(), cfg.Q);
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    steering_row(distance(candidate, nodes[n]), cfg.phase_per_meter(), a.row(n));
  }
  return a;
}

struct ChannelRealization {
  std::vector<Complex> beta;   // e^{j phi_n} / ||p_s - p_n||
  std::vector<Complex> h_bar;  // beta_n e^{-j kappa ||p_s - p_n||}
  Array2<Complex> H;           // N x Q, h_bar_n A(p_s)[n, q]
  std::vector<double> phi;
};

inline ChannelRealization synthesize_channel(const Scene& scene, const SystemConfig& cfg, Rng& rng) {
  const std::size_t n_nodes = scene.node_positions.size();
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  ChannelRealization ch;
  ch.beta.resize(n_nodes);
  ch.h_bar.resize(n_nodes);
  ch.phi.resize(n_nodes);
  for (std::size_t n = 0; n < n_nodes; ++n) {
    const double dist = distance(scene.ue_position, scene.node_positions[n]);
    if (!(dist > 0.0)) {
      throw std::domain_error("synthesize_channel: UE coincides with node " + std::to_string(n));
    }
    ch.phi[n] = phase(rng);
    ch.beta[n] = std::polar(1.0 / dist, ch.phi[n]);
    ch.h_bar[n] = ch.beta[n] * std::polar(1.0, -cfg.kappa() * dist);
  }
  ch.H = steering_matrix(scene.ue_position, scene.node_positions, cfg);
  for (std::size_t n = 0; n < n_nodes; ++n) {
    for (auto& v : ch.H.row(n)) v *= ch.h_bar[n];
  }
  return ch;
}

struct Observations {
  Array3<Complex> y_pilot;  // N x Q x P
  Array3<Complex> y_data;   // N x Q x D
  double sigma2 = 0.0;
};

/// Y = H X + Z with Z ~ CN(0, sigma2) i.i.d.; pilot noise is drawn before
/// data noise so that the pilot block is independent of D.
inline Observations observe(const ChannelRealization& ch, const ResourceGrid& grid, double sigma2,
                            Rng& rng) {
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("observe: sigma2 must be >= 0");
  const std::size_t n_nodes = ch.H.rows();
  const std::size_t n_sub = ch.H.cols();
  const std::size_t n_pilot = grid.X.cols();
  const std::size_t n_data = grid.S.cols();
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = std::sqrt(sigma2 / 2.0);
  auto noise = [&]() {
    const double re = gauss(rng);
    const double im = gauss(rng);
    return Complex(scale * re, scale * im);
  };

  Observations obs;
  obs.sigma2 = sigma2;
  obs.y_pilot = Array3<Complex>(n_nodes, n_sub, n_pilot);
  obs.y_data = Array3<Complex>(n_nodes, n_sub, n_data);
  for (std::size_t n = 0; n < n_nodes; ++n) {
    for (std::size_t q = 0; q < n_sub; ++q) {
      for (std::size_t p = 0; p < n_pilot; ++p) obs.y_pilot(n, q, p) = ch.H(n, q) * grid.X(q, p) + noise();
    }
  }
  for (std::size_t n = 0; n < n_nodes; ++n) {
    for (std::size_t q = 0; q < n_sub; ++q) {
      for (std::size_t d = 0; d < n_data; ++d) obs.y_data(n, q, d) = ch.H(n, q) * grid.S(q, d) + noise();
    }
  }
  return obs;
}

}  // namespace mmloc
