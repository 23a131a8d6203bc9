#pragma once

// Independent numerical reference for the channel-marginalized likelihood:
// tensor-product Gauss-Hermite integration over each node's complex channel
// coefficient. Only meant for tiny instances with moderate sigma2 and gamma.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmloc/channel.hpp"
#include "mmloc/estimators.hpp"
#include "mmloc/logsumexp.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

struct GaussHermiteRule {
  std::vector<double> nodes;    // roots of H_n
  std::vector<double> weights;  // for the weight function exp(-x^2)
};

/// Nodes and weights by Newton iteration on the orthonormal recurrence.
inline GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  constexpr double kPiM4 = 0.7511255444649425;  // pi^(-1/4)
  GaussHermiteRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * rule.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * rule.nodes[1];
    } else {
      z = 2.0 * z - rule.nodes[i - 2];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = kPiM4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = 2.0 / (pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

/// log p(Y | W; p) computed by integrating the Gaussian likelihood against
/// the CN(0, gamma) prior of every node coefficient. With h = sqrt(gamma)(x + jy)
/// the prior becomes exp(-x^2 - y^2) / pi, so each node is one 2-D rule.
inline double quadrature_log_marginal(const Array3<Complex>& Y, const Array2<Complex>& W, Point2 p,
                                      const SteeringGeometry& g, double sigma2, double gamma,
                                      const GaussHermiteRule& rule) {
  if (!(sigma2 > 0.0) || !(gamma > 0.0)) {
    throw std::invalid_argument("quadrature_log_marginal: sigma2 and gamma must be positive");
  }
  const std::size_t n_sub = Y.dim1();
  const std::size_t n_sym = Y.dim2();
  const std::size_t order = rule.nodes.size();
  const double root_gamma = std::sqrt(gamma);
  const double log_norm = -static_cast<double>(n_sub * n_sym) * std::log(kPi * sigma2);

  std::vector<double> log_w(order);
  for (std::size_t i = 0; i < order; ++i) log_w[i] = std::log(rule.weights[i]);

  std::vector<Complex> a(n_sub);
  std::vector<double> terms(order * order);
  double total = 0.0;
  for (std::size_t n = 0; n < Y.dim0(); ++n) {
    steering_row(distance(p, g.nodes[n]), g.phase_per_meter, a);
    for (std::size_t i = 0; i < order; ++i) {
      for (std::size_t j = 0; j < order; ++j) {
        const Complex h = root_gamma * Complex(rule.nodes[i], rule.nodes[j]);
        double resid = 0.0;
        for (std::size_t q = 0; q < n_sub; ++q) {
          for (std::size_t l = 0; l < n_sym; ++l) resid += std::norm(Y(n, q, l) - h * a[q] * W(q, l));
        }
        terms[i * order + j] = log_w[i] + log_w[j] - resid / sigma2;
      }
    }
    total += log_sum_exp(terms) - std::log(kPi) + log_norm;
  }
  return total;
}

}  // namespace mmloc
