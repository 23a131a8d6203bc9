#pragma once

// Position objectives. Every function here is a pure map from a candidate
// position to a real score (larger is better) given a read-only context:
//
//   objective_pilot / objective_equalized   sum_n |sum_q conj(Y~[n,q]) A[n,q]|^2
//   objective_mml_approx                    pilot term + per-cell log-sum over the constellation
//   objective_mml_fast                      same value, per-axis sums over sqrt(M)/2 amplitude levels
//   marginal_channel_likelihood             exact log p(Y | W; p) with the channel integrated out
//   objective_mml_optimal                   log-sum over every data matrix (tiny instances only)

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmloc/channel.hpp"
#include "mmloc/logsumexp.hpp"
#include "mmloc/model.hpp"
#include "mmloc/ops.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

/// Node positions plus the phase slope of the steering matrix.
struct SteeringGeometry {
  std::vector<Point2> nodes;
  double phase_per_meter = 0.0;
  std::size_t Q = 0;

  static SteeringGeometry from(const SystemConfig& cfg, std::vector<Point2> nodes) {
    return {std::move(nodes), cfg.phase_per_meter(), static_cast<std::size_t>(cfg.Q)};
  }

  Array2<Complex> steering(Point2 p) const {
    Array2<Complex> a(nodes.size(), Q);
    for (std::size_t n = 0; n < nodes.size(); ++n) steering_row(distance(p, nodes[n]), phase_per_meter, a.row(n));
    return a;
  }
};

enum class EqualizedKind { Genie, DecisionDirected };

/// Immutable inputs shared by all objectives of one trial.
struct ObjectiveContext {
  SteeringGeometry geometry;
  Array2<Complex> yp_eq;   // N x Q
  Array2<Complex> y_eq;    // N x Q, genie
  Array2<Complex> ydd_eq;  // N x Q, decision-directed
  Array3<Complex> y_data;  // N x Q x D, raw data observations
  double pilot_energy = 0.0;
  double sigma2 = 0.0;
  double gamma = 0.0;
  std::shared_ptr<const ConstellationMap> cmap;
};

// ---------------------------------------------------------------------------
// Correlation-type objectives

/// chi_n(p) = sum_q conj(Y~[n, q]) A(p)[n, q], evaluated by Horner's rule in
/// the per-node phasor exp(-j phase_per_meter ||p - p_n||).
inline std::vector<Complex> node_correlations(const SteeringGeometry& g, const Array2<Complex>& y_eq, Point2 p,
                                              OpCounter* ops = nullptr) {
  std::vector<Complex> chi(g.nodes.size());
  const std::size_t n_sub = y_eq.cols();
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    if (n_sub == 0) continue;
    const Complex w = std::polar(1.0, -g.phase_per_meter * distance(p, g.nodes[n]));
    const auto row = y_eq.row(n);
    Complex acc = std::conj(row[n_sub - 1]);
    for (std::size_t q = n_sub - 1; q-- > 0;) acc = acc * w + std::conj(row[q]);
    chi[n] = acc;
  }
  if (ops) ops->loc_pilot += g.nodes.size() * n_sub;
  return chi;
}

inline double correlation_score(const SteeringGeometry& g, const Array2<Complex>& y_eq, Point2 p,
                                OpCounter* ops = nullptr) {
  double score = 0.0;
  for (const Complex& c : node_correlations(g, y_eq, p, ops)) score += std::norm(c);
  return score;
}

/// Pilot-only score sum_n |chi_n(p)|^2.
inline double objective_pilot(const ObjectiveContext& ctx, Point2 p, OpCounter* ops = nullptr) {
  return correlation_score(ctx.geometry, ctx.yp_eq, p, ops);
}

/// Same functional form as the pilot-only score on the genie or
/// decision-directed equalized matrix.
inline double objective_equalized(const ObjectiveContext& ctx, Point2 p, EqualizedKind which,
                                  OpCounter* ops = nullptr) {
  return correlation_score(ctx.geometry, which == EqualizedKind::Genie ? ctx.y_eq : ctx.ydd_eq, p, ops);
}

// ---------------------------------------------------------------------------
// Pilot-based channel reconstruction

struct PilotChannel {
  std::vector<Complex> chi;    // chi_n(p)
  std::vector<Complex> h_bar;  // (1 / E_P) sum_q conj(A[n, q]) Yp_eq[n, q]
  Array2<Complex> B;           // h_bar[n] A[n, q]
};

inline PilotChannel pilot_channel(const SteeringGeometry& g, const Array2<Complex>& yp_eq, double pilot_energy,
                                  Point2 p) {
  if (!(pilot_energy > 0.0)) throw std::invalid_argument("pilot_channel_coeff: pilot energy must be positive");
  const std::size_t n_nodes = g.nodes.size();
  const std::size_t n_sub = yp_eq.cols();
  PilotChannel pc;
  pc.chi.resize(n_nodes);
  pc.h_bar.resize(n_nodes);
  pc.B = Array2<Complex>(n_nodes, n_sub);
  for (std::size_t n = 0; n < n_nodes; ++n) {
    auto a = pc.B.row(n);
    steering_row(distance(p, g.nodes[n]), g.phase_per_meter, a);
    const auto y = yp_eq.row(n);
    Complex chi{};
    for (std::size_t q = 0; q < n_sub; ++q) chi += std::conj(y[q]) * a[q];
    pc.chi[n] = chi;
    pc.h_bar[n] = std::conj(chi) / pilot_energy;
    for (auto& v : a) v *= pc.h_bar[n];
  }
  return pc;
}

inline PilotChannel pilot_channel_coeff(const ObjectiveContext& ctx, Point2 p) {
  return pilot_channel(ctx.geometry, ctx.yp_eq, ctx.pilot_energy, p);
}

// ---------------------------------------------------------------------------
// Marginal maximum likelihood (approximate and accelerated)

namespace detail {

inline void check_noise_params(double sigma2, double gamma, const char* who) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument(std::string(who) + ": sigma2 must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument(std::string(who) + ": gamma must be positive");
}

inline double mml_pilot_term(const PilotChannel& pc, double pilot_energy, double sigma2, double gamma) {
  double acc = 0.0;
  for (const Complex& c : pc.chi) acc += std::norm(c / sigma2);
  return acc / (pilot_energy / sigma2 + 1.0 / gamma);
}

/// S_qd = sum_n conj(Y_D[n, q, d]) B[n, q] for every d, and H_q.
inline double combine_cell_row(const Array2<Complex>& B, const Array3<Complex>& y_data, std::size_t q,
                               std::span<Complex> s_out) {
  double h = 0.0;
  for (auto& s : s_out) s = {};
  for (std::size_t n = 0; n < B.rows(); ++n) {
    const Complex b = B(n, q);
    h += std::norm(b);
    const auto y = y_data.fiber(n, q);
    // Plain real arithmetic: std::complex products carry NaN-recovery
    // branches that block vectorization of this inner loop.
    const double br = b.real();
    const double bi = b.imag();
    const double* yv = reinterpret_cast<const double*>(y.data());
    double* sv = reinterpret_cast<double*>(s_out.data());
    for (std::size_t d = 0; d < s_out.size(); ++d) {
      const double yr = yv[2 * d];
      const double yi = yv[2 * d + 1];
      sv[2 * d] += yr * br + yi * bi;
      sv[2 * d + 1] += yr * bi - yi * br;
    }
  }
  return h;
}

struct AxisSum {
  double e_top = 0.0;  // largest exponent k t - k^2 c
  double sum = 0.0;    // sum of all terms divided by exp(e_top)
};

/// sum_{k odd, 1..side-1} 2 cosh(k t) exp(-k^2 c), for t, c >= 0, as
/// exp(e_top) * sum. gpow[j] must hold exp(-8 c j) for j = 0..side/2.
///
/// Each term equals exp(k t - k^2 c) (1 + u^k) with u = exp(-2t). The
/// exponents are concave in k, so the sum is taken relative to the largest
/// one; neighbouring exponent ratios follow a geometric recurrence in
/// g = exp(-8c) and every weight stays in [0, 1]. The first ratio above the
/// top is r_up = g^(top+1) / u and the one below is u / g^top, so a single
/// exponential usually yields u and both ratios.
inline AxisSum qam_axis_sum(double t, double c, const double* gpow, int side) {
  constexpr double kTiny = 1e-300;
  const int levels = side / 2;
  auto exponent = [&](int j) {
    const double k = 2.0 * j + 1.0;
    return k * t - k * k * c;
  };

  int top = 0;
  double e_top = t - c;
  for (int j = 1; j < levels; ++j) {
    const double e = exponent(j);
    if (e > e_top) {
      e_top = e;
      top = j;
    }
  }
  const double g = gpow[1];

  double u = 0.0;
  double r_up = 0.0;
  double r_down = 0.0;
  if (top + 1 < levels) {
    r_up = std::exp(exponent(top + 1) - e_top);
    u = r_up > kTiny && gpow[top + 1] > kTiny ? gpow[top + 1] / r_up : std::exp(-2.0 * t);
    if (top > 0) r_down = r_up > kTiny ? g / r_up : std::exp(exponent(top - 1) - e_top);
  } else {
    u = std::exp(-2.0 * t);
    if (top > 0) r_down = gpow[top] > kTiny ? u / gpow[top] : std::exp(exponent(top - 1) - e_top);
  }

  double sum = 1.0;
  if (u < 1e-17) {
    // 1 + u^k rounds to 1 for every k.
    double w = 1.0;
    for (int j = top + 1; j < levels; ++j) {
      w *= r_up;
      r_up *= g;
      sum += w;
    }
    w = 1.0;
    for (int j = top - 1; j >= 0; --j) {
      w *= r_down;
      r_down *= g;
      sum += w;
    }
    return {e_top, sum};
  }

  const double u2 = u * u;
  std::array<double, 64> small;  // only the first `levels` entries are written and read
  std::vector<double> large;
  double* upow = small.data();
  if (levels > static_cast<int>(small.size())) {
    large.resize(levels);
    upow = large.data();
  }
  upow[0] = u;
  for (int j = 1; j < levels; ++j) upow[j] = upow[j - 1] * u2;

  sum += upow[top];
  double w = 1.0;
  for (int j = top + 1; j < levels; ++j) {
    w *= r_up;
    r_up *= g;
    sum += w * (1.0 + upow[j]);
  }
  w = 1.0;
  for (int j = top - 1; j >= 0; --j) {
    w *= r_down;
    r_down *= g;
    sum += w * (1.0 + upow[j]);
  }
  return {e_top, sum};
}

/// Fills gpow[0..levels] with exp(-8 c j).
inline void fill_gpow(double c, int levels, std::vector<double>& gpow) {
  gpow.resize(levels + 1);
  gpow[0] = 1.0;
  if (levels >= 1) gpow[1] = std::exp(-8.0 * c);
  for (int j = 2; j <= levels; ++j) gpow[j] = gpow[j - 1] * gpow[1];
}

inline double qam_axis_log_sum(double t, double c, int side) {
  std::vector<double> gpow;
  fill_gpow(c, side / 2, gpow);
  const AxisSum a = qam_axis_sum(t, c, gpow.data(), side);
  return a.e_top + std::log(a.sum);
}

}  // namespace detail

/// Pilot term (E_P/sigma2 + 1/gamma)^-1 sum_n |chi_n / sigma2|^2 plus, for
/// every data cell, log sum_s exp((2/sigma2) Re{s S_qd} - |s|^2 H_q / sigma2).
inline double objective_mml_approx(const ObjectiveContext& ctx, Point2 p, OpCounter* ops = nullptr) {
  detail::check_noise_params(ctx.sigma2, ctx.gamma, "objective_mml_approx");
  const PilotChannel pc = pilot_channel_coeff(ctx, p);
  const double sigma2 = ctx.sigma2;
  double score = detail::mml_pilot_term(pc, ctx.pilot_energy, sigma2, ctx.gamma);

  const std::size_t n_nodes = ctx.y_data.dim0();
  const std::size_t n_sub = ctx.y_data.dim1();
  const std::size_t n_data = ctx.y_data.dim2();
  std::vector<Complex> s_row(n_data);
  for (std::size_t q = 0; q < n_sub && n_data > 0; ++q) {
    const double h = detail::combine_cell_row(pc.B, ctx.y_data, q, s_row);
    for (std::size_t d = 0; d < n_data; ++d) {
      const auto& points = ctx.cmap->at(q, d).points;
      const Complex s_qd = s_row[d];
      auto arg = [&](const Complex& s) { return (2.0 * (s * s_qd).real() - std::norm(s) * h) / sigma2; };
      double m = -std::numeric_limits<double>::infinity();
      for (const auto& s : points) m = std::max(m, arg(s));
      double sum = 0.0;
      for (const auto& s : points) sum += std::exp(arg(s) - m);
      score += m + std::log(sum);
      if (ops) ops->loc_data_constellation += points.size();
    }
  }
  if (ops) {
    ops->loc_pilot += n_nodes * n_sub;
    if (n_data > 0) ops->loc_data_combine += n_nodes * n_sub * n_data;
  }
  return score;
}

/// Identical value to objective_mml_approx for square-QAM cells; the data
/// term factorizes into real and imaginary amplitude levels.
inline double objective_mml_fast(const ObjectiveContext& ctx, Point2 p, OpCounter* ops = nullptr) {
  detail::check_noise_params(ctx.sigma2, ctx.gamma, "objective_mml_fast");
  const std::size_t n_nodes = ctx.y_data.dim0();
  const std::size_t n_sub = ctx.y_data.dim1();
  const std::size_t n_data = ctx.y_data.dim2();
  if (n_data > 0 && !ctx.cmap->all_qam()) {
    throw std::invalid_argument(
        "objective_mml_fast: constellation map contains non-QAM cells; use objective_mml_approx");
  }
  const PilotChannel pc = pilot_channel_coeff(ctx, p);
  const double sigma2 = ctx.sigma2;
  double score = detail::mml_pilot_term(pc, ctx.pilot_energy, sigma2, ctx.gamma);

  std::vector<Complex> s_row(n_data);
  std::vector<double> gpow;
  // Each axis sum lies in [1, side], so the per-cell factors are multiplied
  // up and logged only when the product grows large.
  double prod = 1.0;
  for (std::size_t q = 0; q < n_sub && n_data > 0; ++q) {
    const double h = detail::combine_cell_row(pc.B, ctx.y_data, q, s_row);
    const Constellation* last = nullptr;
    double t_scale = 0.0;
    double c_val = 0.0;
    for (std::size_t d = 0; d < n_data; ++d) {
      const Constellation& c = ctx.cmap->at(q, d);
      if (&c != last) {
        t_scale = 2.0 / (sigma2 * std::sqrt(c.energy_norm));
        c_val = h / (sigma2 * c.energy_norm);
        detail::fill_gpow(c_val, c.side / 2, gpow);
        last = &c;
      }
      const detail::AxisSum re = detail::qam_axis_sum(t_scale * std::abs(s_row[d].real()), c_val, gpow.data(), c.side);
      const detail::AxisSum im = detail::qam_axis_sum(t_scale * std::abs(s_row[d].imag()), c_val, gpow.data(), c.side);
      score += re.e_top + im.e_top;
      prod *= re.sum * im.sum;
      if (prod > 1e200) {
        score += std::log(prod);
        prod = 1.0;
      }
      if (ops) ops->loc_data_constellation += static_cast<std::uint64_t>(c.side);
    }
  }
  if (ops) {
    ops->loc_pilot += n_nodes * n_sub;
    if (n_data > 0) ops->loc_data_combine += n_nodes * n_sub * n_data;
  }
  return score + std::log(prod);
}

// ---------------------------------------------------------------------------
// Optimal MML (channel integrated out exactly, data enumerated)

/// Exact log-density log p(Y | W; p) for Y ~ CN(h_bar[n] A(p)[n, q] W[q, l], sigma2)
/// with h_bar ~ CN(0, gamma I):
///   -K log(pi sigma2) - N log gamma - ||Y||^2 / sigma2 - N log V + sum_n |U_n|^2 / V,
/// U_n = (1/sigma2) sum_{q,l} conj(Y[n,q,l]) A[n,q] W[q,l],  V = ||W||^2 / sigma2 + 1/gamma.
inline double marginal_channel_likelihood(const Array3<Complex>& Y, const Array2<Complex>& W, Point2 p,
                                          const SteeringGeometry& g, double sigma2, double gamma) {
  detail::check_noise_params(sigma2, gamma, "marginal_channel_likelihood");
  if (Y.dim0() != g.nodes.size() || Y.dim1() != W.rows() || Y.dim2() != W.cols()) {
    throw std::invalid_argument("marginal_channel_likelihood: shape mismatch between Y and W");
  }
  const std::size_t n_nodes = Y.dim0();
  const std::size_t n_sub = Y.dim1();
  const std::size_t n_sym = Y.dim2();
  const double k_obs = static_cast<double>(Y.size());

  const double v = frobenius2(W) / sigma2 + 1.0 / gamma;
  double y_energy = 0.0;
  for (const auto& y : Y.flat()) y_energy += std::norm(y);

  std::vector<Complex> a(n_sub);
  double quad = 0.0;
  for (std::size_t n = 0; n < n_nodes; ++n) {
    steering_row(distance(p, g.nodes[n]), g.phase_per_meter, a);
    Complex u{};
    for (std::size_t q = 0; q < n_sub; ++q) {
      Complex inner{};
      for (std::size_t l = 0; l < n_sym; ++l) inner += std::conj(Y(n, q, l)) * W(q, l);
      u += inner * a[q];
    }
    u /= sigma2;
    quad += std::norm(u) / v;
  }
  return -k_obs * std::log(kPi * sigma2) - static_cast<double>(n_nodes) * std::log(gamma) - y_energy / sigma2 -
         static_cast<double>(n_nodes) * std::log(v) + quad;
}

inline Array3<Complex> concat_time(const Array3<Complex>& a, const Array3<Complex>& b) {
  Array3<Complex> out(a.dim0(), a.dim1(), a.dim2() + b.dim2());
  for (std::size_t i = 0; i < a.dim0(); ++i) {
    for (std::size_t j = 0; j < a.dim1(); ++j) {
      for (std::size_t k = 0; k < a.dim2(); ++k) out(i, j, k) = a(i, j, k);
      for (std::size_t k = 0; k < b.dim2(); ++k) out(i, j, a.dim2() + k) = b(i, j, k);
    }
  }
  return out;
}

/// Number of data matrices enumerated by the optimal objective.
inline double enumeration_size(const ConstellationMap& cmap) {
  double count = 1.0;
  for (std::size_t q = 0; q < cmap.Q(); ++q) {
    for (std::size_t d = 0; d < cmap.D(); ++d) count *= static_cast<double>(cmap.at(q, d).order);
  }
  return count;
}

/// log sum_S p(Y | [X S]; p) P(S) over every data matrix S, uniform prior.
inline double objective_mml_optimal(const Array3<Complex>& y_pilot, const Array3<Complex>& y_data,
                                    const Array2<Complex>& X, const ConstellationMap& cmap, Point2 p,
                                    const SteeringGeometry& g, double sigma2, double gamma,
                                    std::uint64_t cap = 65536) {
  const std::size_t n_sub = X.rows();
  const std::size_t n_pilot = X.cols();
  const std::size_t n_data = y_data.dim2();
  const double count = enumeration_size(cmap);
  if (count > static_cast<double>(cap)) {
    throw std::length_error("objective_mml_optimal: " + std::to_string(static_cast<long double>(count)) +
                            " data hypotheses exceed the enumeration cap of " + std::to_string(cap));
  }
  const Array3<Complex> Y = concat_time(y_pilot, y_data);
  Array2<Complex> W(n_sub, n_pilot + n_data);
  for (std::size_t q = 0; q < n_sub; ++q) {
    for (std::size_t l = 0; l < n_pilot; ++l) W(q, l) = X(q, l);
  }
  const double log_prior = -std::log(count);

  // Mixed-radix counter over cells (q, d), d fastest.
  const std::size_t cells = n_sub * n_data;
  std::vector<std::size_t> digit(cells, 0);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(count));
  while (true) {
    for (std::size_t c = 0; c < cells; ++c) {
      const std::size_t q = c / n_data;
      const std::size_t d = c % n_data;
      W(q, n_pilot + d) = cmap.at(q, d).points[digit[c]];
    }
    terms.push_back(marginal_channel_likelihood(Y, W, p, g, sigma2, gamma) + log_prior);
    // Increment with carry; finished once the most significant digit wraps.
    std::size_t c = cells;
    bool done = true;
    while (c > 0) {
      --c;
      const std::size_t radix = cmap.at(c / n_data, c % n_data).points.size();
      if (++digit[c] < radix) {
        done = false;
        break;
      }
      digit[c] = 0;
    }
    if (done) break;
  }
  return log_sum_exp(terms);
}

}  // namespace mmloc
