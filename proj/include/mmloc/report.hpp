#pragma once

// CSV emission. Doubles use round-trip formatting (%.17g) and rows end in
// '\n', so identical results give byte-identical files.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "mmloc/experiment.hpp"

namespace mmloc {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  os << "estimator,snr_db,rmse_m,rmse_lambda,ser,mae,n_trials,tx_scalars_per_node\n";
  for (const auto& row : r.rows) {
    os << estimator_name(row.estimator) << ',' << format_double(row.snr_db) << ',' << format_double(row.rmse_m) << ','
       << format_double(row.rmse_lambda) << ',' << (row.ser ? format_double(*row.ser) : "") << ','
       << (row.mae ? format_double(*row.mae) : "") << ',' << row.n_trials << ',' << row.tx_scalars_per_node << '\n';
  }
}

/// Columns x_m, af_coh_norm, af_noncoh_norm; normalized by the values at the
/// truth, N*Q and N*Q^2.
inline void write_af_csv(std::ostream& os, const std::vector<AfSample>& af, std::size_t n_nodes, int Q) {
  const double coh_peak = static_cast<double>(n_nodes) * Q;
  const double noncoh_peak = static_cast<double>(n_nodes) * Q * Q;
  os << "x_m,af_coh_norm,af_noncoh_norm\n";
  for (const auto& s : af) {
    os << format_double(s.coordinate) << ',' << format_double(s.af_coh / coh_peak) << ','
       << format_double(s.af_noncoh / noncoh_peak) << '\n';
  }
}

inline void write_complexity_header(std::ostream& os) {
  os << "estimator,step,measured_ops,asymptotic_formula,instantiated_value\n";
}

inline void write_complexity_rows(std::ostream& os, const ComplexityReport& rep) {
  for (const auto& row : rep.rows) {
    os << estimator_name(rep.estimator) << ',' << row.step << ',' << row.measured << ',' << row.formula << ','
       << format_double(row.instantiated) << '\n';
  }
}

}  // namespace mmloc
