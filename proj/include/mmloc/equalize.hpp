#pragma once

// Symbol equalization of pilot/data observations, LMMSE channel and data
// estimation and hard decisions. These feed the pilot-only, genie and
// decision-directed localization baselines.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "mmloc/model.hpp"
#include "mmloc/ops.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

enum class DemodMode { Centralized, Distributed };

/// Equalized observation matrices; which ones are populated depends on the
/// estimator being evaluated.
struct EqualizedObs {
  Array2<Complex> yp_eq;   // pilot-only
  Array2<Complex> y_eq;    // genie full frame
  Array2<Complex> ydd_eq;  // decision-directed
};

struct DataEstimates {
  Array2<Complex> soft_centr;  // Q x D
  Array2<Complex> hard_centr;  // Q x D
  Array3<Complex> soft_distr;  // N x Q x D
  Array3<Complex> hard_distr;  // N x Q x D
  Array2<Complex> h_hat;       // N x Q
};

/// Yp_eq[n, q] = sum_p conj(X[q, p]) Y_P[n, q, p].
inline Array2<Complex> pilot_equalize(const Array3<Complex>& y_pilot, const Array2<Complex>& X,
                                      OpCounter* ops = nullptr) {
  if (y_pilot.dim1() != X.rows() || y_pilot.dim2() != X.cols()) {
    throw std::invalid_argument("pilot_equalize: shape mismatch between Y_P and X");
  }
  Array2<Complex> out(y_pilot.dim0(), y_pilot.dim1());
  for (std::size_t n = 0; n < y_pilot.dim0(); ++n) {
    for (std::size_t q = 0; q < y_pilot.dim1(); ++q) {
      Complex acc{};
      for (std::size_t p = 0; p < X.cols(); ++p) acc += std::conj(X(q, p)) * y_pilot(n, q, p);
      out(n, q) = acc;
    }
  }
  if (ops) ops->equalization += y_pilot.size();
  return out;
}

/// Y_eq[n, q] = Yp_eq[n, q] + sum_d conj(S[q, d]) Y_D[n, q, d], with the true
/// data matrix.
inline Array2<Complex> genie_equalize(const Array2<Complex>& yp_eq, const Array3<Complex>& y_data,
                                      const Array2<Complex>& S, OpCounter* ops = nullptr) {
  Array2<Complex> out = yp_eq;
  for (std::size_t n = 0; n < y_data.dim0(); ++n) {
    for (std::size_t q = 0; q < y_data.dim1(); ++q) {
      Complex acc{};
      for (std::size_t d = 0; d < y_data.dim2(); ++d) acc += std::conj(S(q, d)) * y_data(n, q, d);
      out(n, q) += acc;
    }
  }
  if (ops) ops->equalization += y_data.size();
  return out;
}

/// Decision-directed equalization with a single centralized data estimate.
inline Array2<Complex> dd_equalize(const Array2<Complex>& yp_eq, const Array3<Complex>& y_data,
                                   const Array2<Complex>& s_hat, OpCounter* ops = nullptr) {
  return genie_equalize(yp_eq, y_data, s_hat, ops);
}

/// Decision-directed equalization with per-node data estimates S_hat[n, q, d].
inline Array2<Complex> dd_equalize(const Array2<Complex>& yp_eq, const Array3<Complex>& y_data,
                                   const Array3<Complex>& s_hat, OpCounter* ops = nullptr) {
  Array2<Complex> out = yp_eq;
  for (std::size_t n = 0; n < y_data.dim0(); ++n) {
    for (std::size_t q = 0; q < y_data.dim1(); ++q) {
      Complex acc{};
      for (std::size_t d = 0; d < y_data.dim2(); ++d) acc += std::conj(s_hat(n, q, d)) * y_data(n, q, d);
      out(n, q) += acc;
    }
  }
  if (ops) ops->equalization += y_data.size();
  return out;
}

/// Scalar Wiener estimate per (n, q) under the prior H[n, q] ~ CN(0, gamma):
/// H_hat = (sum_p conj(X) Y_P) / (sum_p |X|^2 + sigma2 / gamma).
inline Array2<Complex> estimate_channel_lmmse(const Array3<Complex>& y_pilot, const Array2<Complex>& X,
                                              double sigma2, double gamma, OpCounter* ops = nullptr) {
  if (X.cols() == 0) throw std::invalid_argument("estimate_channel_lmmse: at least one pilot symbol required");
  Array2<Complex> h_hat = pilot_equalize(y_pilot, X);
  if (ops) ops->channel_estimation += y_pilot.size();
  for (std::size_t q = 0; q < X.rows(); ++q) {
    double energy = 0.0;
    for (std::size_t p = 0; p < X.cols(); ++p) energy += std::norm(X(q, p));
    const double denom = energy + sigma2 / gamma;
    for (std::size_t n = 0; n < h_hat.rows(); ++n) h_hat(n, q) /= denom;
  }
  return h_hat;
}

/// Unit-variance LMMSE data estimates. Centralized combines all nodes per
/// cell; distributed uses each node on its own.
inline void soft_data_estimate(const Array2<Complex>& h_hat, const Array3<Complex>& y_data, double sigma2,
                               DemodMode mode, DataEstimates& out, OpCounter* ops = nullptr) {
  const std::size_t n_nodes = y_data.dim0();
  const std::size_t n_sub = y_data.dim1();
  const std::size_t n_data = y_data.dim2();
  constexpr double kSymbolVar = 1.0;
  if (mode == DemodMode::Centralized) {
    out.soft_centr = Array2<Complex>(n_sub, n_data);
    for (std::size_t q = 0; q < n_sub; ++q) {
      double gain = 0.0;
      for (std::size_t n = 0; n < n_nodes; ++n) gain += std::norm(h_hat(n, q));
      const double denom = gain + sigma2 / kSymbolVar;
      for (std::size_t d = 0; d < n_data; ++d) {
        Complex acc{};
        for (std::size_t n = 0; n < n_nodes; ++n) acc += std::conj(h_hat(n, q)) * y_data(n, q, d);
        out.soft_centr(q, d) = denom > 0.0 ? acc / denom : Complex{};
      }
    }
  } else {
    out.soft_distr = Array3<Complex>(n_nodes, n_sub, n_data);
    for (std::size_t n = 0; n < n_nodes; ++n) {
      for (std::size_t q = 0; q < n_sub; ++q) {
        const double denom = std::norm(h_hat(n, q)) + sigma2 / kSymbolVar;
        for (std::size_t d = 0; d < n_data; ++d) {
          out.soft_distr(n, q, d) = denom > 0.0 ? std::conj(h_hat(n, q)) * y_data(n, q, d) / denom : Complex{};
        }
      }
    }
  }
  out.h_hat = h_hat;
  if (ops) ops->soft_estimation += y_data.size();
}

/// Exhaustive nearest-point search; ties go to the lowest point index.
inline std::size_t nearest_point_index(const Constellation& c, Complex value) {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const double dist = std::norm(value - c.points[i]);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

/// O(1) per-axis slicer for square QAM with the same tie-break as the
/// exhaustive search. BPSK falls back to the exhaustive path.
inline std::size_t slice_point_index(const Constellation& c, Complex value) {
  if (!c.is_qam) return nearest_point_index(c, value);
  const double scale = std::sqrt(c.energy_norm);
  auto level = [&](double x) {
    // x * sqrt(E) = 2r - side + 1  ->  r = (x * sqrt(E) + side - 1) / 2, half-way rounds down
    const double r = (x * scale + c.side - 1) / 2.0;
    const double idx = std::ceil(r - 0.5);
    return static_cast<int>(std::clamp(idx, 0.0, static_cast<double>(c.side - 1)));
  };
  return static_cast<std::size_t>(level(value.real()) * c.side + level(value.imag()));
}

inline Complex decide(const Constellation& c, Complex value, bool fast_slicer) {
  return c.points[fast_slicer ? slice_point_index(c, value) : nearest_point_index(c, value)];
}

inline Array2<Complex> hard_decision(const Array2<Complex>& soft, const ConstellationMap& cmap,
                                     bool fast_slicer = false, OpCounter* ops = nullptr) {
  Array2<Complex> out(soft.rows(), soft.cols());
  for (std::size_t q = 0; q < soft.rows(); ++q) {
    for (std::size_t d = 0; d < soft.cols(); ++d) {
      out(q, d) = decide(cmap.at(q, d), soft(q, d), fast_slicer);
      if (ops && !fast_slicer) ops->hard_decision += cmap.at(q, d).points.size();
    }
  }
  return out;
}

inline Array3<Complex> hard_decision(const Array3<Complex>& soft, const ConstellationMap& cmap,
                                     bool fast_slicer = false, OpCounter* ops = nullptr) {
  Array3<Complex> out(soft.dim0(), soft.dim1(), soft.dim2());
  for (std::size_t n = 0; n < soft.dim0(); ++n) {
    for (std::size_t q = 0; q < soft.dim1(); ++q) {
      for (std::size_t d = 0; d < soft.dim2(); ++d) {
        out(n, q, d) = decide(cmap.at(q, d), soft(n, q, d), fast_slicer);
        if (ops && !fast_slicer) ops->hard_decision += cmap.at(q, d).points.size();
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Communication metrics

inline double symbol_error_rate(const Array2<Complex>& hard, const Array2<Complex>& truth) {
  if (truth.empty()) return 0.0;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) errors += hard.flat()[i] != truth.flat()[i];
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}

/// Per-node SERs averaged over nodes.
inline double symbol_error_rate(const Array3<Complex>& hard, const Array2<Complex>& truth) {
  if (truth.empty() || hard.dim0() == 0) return 0.0;
  std::size_t errors = 0;
  for (std::size_t n = 0; n < hard.dim0(); ++n) {
    for (std::size_t q = 0; q < hard.dim1(); ++q) {
      for (std::size_t d = 0; d < hard.dim2(); ++d) errors += hard(n, q, d) != truth(q, d);
    }
  }
  return static_cast<double>(errors) / static_cast<double>(hard.size());
}

inline double mean_abs_error(const Array2<Complex>& soft, const Array2<Complex>& truth) {
  if (truth.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += std::abs(soft.flat()[i] - truth.flat()[i]);
  return acc / static_cast<double>(truth.size());
}

inline double mean_abs_error(const Array3<Complex>& soft, const Array2<Complex>& truth) {
  if (truth.empty() || soft.dim0() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t n = 0; n < soft.dim0(); ++n) {
    for (std::size_t q = 0; q < soft.dim1(); ++q) {
      for (std::size_t d = 0; d < soft.dim2(); ++d) acc += std::abs(soft(n, q, d) - truth(q, d));
    }
  }
  return acc / static_cast<double>(soft.size());
}

}  // namespace mmloc
