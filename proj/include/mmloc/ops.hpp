#pragma once

#include <cstdint>

namespace mmloc {

/// Operation tallies per processing step. A counter is owned by one thread;
/// merge with operator+= after the work is done.
struct OpCounter {
  std::uint64_t channel_estimation = 0;      // complex MACs
  std::uint64_t soft_estimation = 0;         // complex MACs
  std::uint64_t hard_decision = 0;           // candidate-point distance evaluations
  std::uint64_t equalization = 0;            // complex MACs building Yp_eq / Y_eq / Ydd_eq
  std::uint64_t loc_pilot = 0;               // complex MACs in the per-node correlations
  std::uint64_t loc_data_combine = 0;        // complex MACs forming S_qd and H_q
  std::uint64_t loc_data_constellation = 0;  // symbol-hypothesis terms visited in the data term

  OpCounter& operator+=(const OpCounter& o) {
    channel_estimation += o.channel_estimation;
    soft_estimation += o.soft_estimation;
    hard_decision += o.hard_decision;
    equalization += o.equalization;
    loc_pilot += o.loc_pilot;
    loc_data_combine += o.loc_data_combine;
    loc_data_constellation += o.loc_data_constellation;
    return *this;
  }
};

}  // namespace mmloc
