#pragma once

// Randomized cross-checks on tiny instances: accelerated vs direct MML
// objective, and the closed-form marginal likelihood vs quadrature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>

#include "mmloc/estimators.hpp"
#include "mmloc/model.hpp"
#include "mmloc/oracle.hpp"
#include "mmloc/rng.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

struct CheckStats {
  std::size_t comparisons = 0;
  double max_rel_error = 0.0;

  void add(double value, double reference) {
    ++comparisons;
    const double rel = std::abs(value - reference) / std::max(std::abs(reference), 1e-300);
    max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : std::max(max_rel_error, rel);
  }
};

/// A small random instance drawn from the observation model itself.
struct TinyInstance {
  SteeringGeometry geometry;
  Array2<Complex> X;        // Q x P
  Array2<Complex> S;        // Q x D
  Array3<Complex> y_pilot;  // N x Q x P
  Array3<Complex> y_data;   // N x Q x D
  std::shared_ptr<const ConstellationMap> cmap;
  double sigma2 = 1.0;
  double gamma = 1.0;
  Point2 truth;
};

inline Complex complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
  const double re = g(rng);
  const double im = g(rng);
  return {re, im};
}

inline TinyInstance make_tiny_instance(Rng& rng, int N, int Q, int P, int D, const ConstellationMap& cmap,
                                       double sigma2, double gamma) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TinyInstance in;
  in.sigma2 = sigma2;
  in.gamma = gamma;
  in.cmap = std::make_shared<const ConstellationMap>(cmap);
  in.geometry.Q = static_cast<std::size_t>(Q);
  in.geometry.phase_per_meter = 0.05 + 0.05 * (u(rng) + 1.0);
  for (int n = 0; n < N; ++n) in.geometry.nodes.push_back({100.0 * u(rng), 100.0 * u(rng)});
  in.truth = {20.0 * u(rng), 20.0 * u(rng)};

  std::bernoulli_distribution coin(0.5);
  in.X = Array2<Complex>(Q, P);
  for (auto& x : in.X.flat()) x = coin(rng) ? 1.0 : -1.0;
  in.S = Array2<Complex>(Q, D);
  for (int q = 0; q < Q; ++q) {
    for (int d = 0; d < D; ++d) {
      const auto& pts = cmap.at(q, d).points;
      std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
      in.S(q, d) = pts[pick(rng)];
    }
  }
  const Array2<Complex> A = in.geometry.steering(in.truth);
  in.y_pilot = Array3<Complex>(N, Q, P);
  in.y_data = Array3<Complex>(N, Q, D);
  for (int n = 0; n < N; ++n) {
    const Complex h = complex_normal(rng, gamma);
    for (int q = 0; q < Q; ++q) {
      for (int p = 0; p < P; ++p) in.y_pilot(n, q, p) = h * A(n, q) * in.X(q, p) + complex_normal(rng, sigma2);
      for (int d = 0; d < D; ++d) in.y_data(n, q, d) = h * A(n, q) * in.S(q, d) + complex_normal(rng, sigma2);
    }
  }
  return in;
}

inline ObjectiveContext make_context(const TinyInstance& in) {
  ObjectiveContext ctx;
  ctx.geometry = in.geometry;
  ctx.yp_eq = Array2<Complex>(in.y_pilot.dim0(), in.y_pilot.dim1());
  for (std::size_t n = 0; n < in.y_pilot.dim0(); ++n) {
    for (std::size_t q = 0; q < in.y_pilot.dim1(); ++q) {
      for (std::size_t p = 0; p < in.y_pilot.dim2(); ++p) ctx.yp_eq(n, q) += std::conj(in.X(q, p)) * in.y_pilot(n, q, p);
    }
  }
  ctx.y_data = in.y_data;
  ctx.pilot_energy = frobenius2(in.X);
  ctx.sigma2 = in.sigma2;
  ctx.gamma = in.gamma;
  ctx.cmap = in.cmap;
  return ctx;
}

/// Accelerated vs direct MML objective on random QAM instances with
/// sigma2 log-uniform in [1e-6, 1]. Orders cycle through 4, 16, 64, 256.
inline CheckStats check_fast_vs_approx(std::uint64_t seed, std::size_t instances) {
  Rng rng = make_stream(seed, Stream::Oracle);
  std::uniform_int_distribution<int> n_dist(1, 4);
  std::uniform_int_distribution<int> q_dist(1, 6);
  std::uniform_int_distribution<int> d_dist(1, 3);
  std::uniform_real_distribution<double> log_s2(-6.0, 0.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  constexpr int kOrders[] = {4, 16, 64, 256};
  CheckStats stats;
  for (std::size_t i = 0; i < instances; ++i) {
    const int N = n_dist(rng);
    const int Q = q_dist(rng);
    const int D = d_dist(rng);
    const double sigma2 = std::pow(10.0, log_s2(rng));
    ConstellationMap cmap;
    if (i % 5 == 4) {
      Array2<int> orders(Q, D);
      std::uniform_int_distribution<int> pick(0, 3);
      for (auto& m : orders.flat()) m = kOrders[pick(rng)];
      cmap = ConstellationMap::from_orders(orders);
    } else {
      cmap = ConstellationMap::uniform(kOrders[i % 4], Q, D);
    }
    const TinyInstance in = make_tiny_instance(rng, N, Q, 1, D, cmap, sigma2, 1.0);
    const ObjectiveContext ctx = make_context(in);
    const Point2 cand = in.truth + Point2{5.0 * u(rng), 5.0 * u(rng)};
    stats.add(objective_mml_fast(ctx, cand), objective_mml_approx(ctx, cand));
  }
  return stats;
}

/// Closed-form log p(Y | W; p) vs Gauss-Hermite integration over the node
/// coefficients, on N in {1,2}, Q in {1,2}, P = 1, D in {0,1} instances.
inline CheckStats check_marginal_vs_quadrature(std::uint64_t seed, std::size_t instances, int order = 80) {
  Rng rng = make_stream(seed, Stream::Oracle);
  std::uniform_int_distribution<int> two(1, 2);
  std::uniform_int_distribution<int> d_dist(0, 1);
  std::uniform_real_distribution<double> param(0.5, 2.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const GaussHermiteRule rule = gauss_hermite(order);
  CheckStats stats;
  for (std::size_t i = 0; i < instances; ++i) {
    const int N = two(rng);
    const int Q = two(rng);
    const int D = d_dist(rng);
    const double sigma2 = param(rng);
    const double gamma = param(rng);
    const ConstellationMap cmap = ConstellationMap::uniform(4, Q, D);
    const TinyInstance in = make_tiny_instance(rng, N, Q, 1, D, cmap, sigma2, gamma);
    Array2<Complex> W(Q, 1 + D);
    for (int q = 0; q < Q; ++q) {
      W(q, 0) = in.X(q, 0);
      for (int d = 0; d < D; ++d) W(q, 1 + d) = in.S(q, d);
    }
    const Array3<Complex> Y = concat_time(in.y_pilot, in.y_data);
    const Point2 cand = in.truth + Point2{3.0 * u(rng), 3.0 * u(rng)};
    stats.add(marginal_channel_likelihood(Y, W, cand, in.geometry, sigma2, gamma),
              quadrature_log_marginal(Y, W, cand, in.geometry, sigma2, gamma, rule));
  }
  return stats;
}

}  // namespace mmloc
