#pragma once

// Monte Carlo harness: one trial runs every requested estimator on a shared
// realization; a sweep maps trials over (snr, trial index) in parallel and
// reduces in index order. Also hosts the ambiguity function and the
// operation / transmission bookkeeping.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mmloc/channel.hpp"
#include "mmloc/equalize.hpp"
#include "mmloc/estimators.hpp"
#include "mmloc/model.hpp"
#include "mmloc/ops.hpp"
#include "mmloc/rng.hpp"
#include "mmloc/search.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

enum class Estimator { P, PD, HDDCentr, HDDDistr, SDDCentr, SDDDistr, MMLFast, MMLApprox, MMLOpt };

inline constexpr std::array<Estimator, 9> kAllEstimators = {
    Estimator::P,        Estimator::PD,       Estimator::HDDCentr,  Estimator::HDDDistr, Estimator::SDDCentr,
    Estimator::SDDDistr, Estimator::MMLFast,  Estimator::MMLApprox, Estimator::MMLOpt};

inline std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::P: return "P";
    case Estimator::PD: return "PD";
    case Estimator::HDDCentr: return "HDD-centr";
    case Estimator::HDDDistr: return "HDD-distr";
    case Estimator::SDDCentr: return "SDD-centr";
    case Estimator::SDDDistr: return "SDD-distr";
    case Estimator::MMLFast: return "MML-fast";
    case Estimator::MMLApprox: return "MML-approx";
    case Estimator::MMLOpt: return "MML-opt";
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view name) {
  for (Estimator e : kAllEstimators) {
    if (estimator_name(e) == name) return e;
  }
  throw std::invalid_argument("unknown estimator '" + std::string(name) +
                              "' (expected one of P, PD, HDD-centr, HDD-distr, SDD-centr, SDD-distr, "
                              "MML-fast, MML-approx, MML-opt)");
}

inline bool is_mml(Estimator e) {
  return e == Estimator::MMLFast || e == Estimator::MMLApprox || e == Estimator::MMLOpt;
}
inline bool is_dd(Estimator e) {
  return e == Estimator::HDDCentr || e == Estimator::HDDDistr || e == Estimator::SDDCentr ||
         e == Estimator::SDDDistr;
}
inline bool is_distributed(Estimator e) { return e == Estimator::HDDDistr || e == Estimator::SDDDistr; }

// ---------------------------------------------------------------------------
// Transmission bookkeeping

/// Per-node forwarding cost. Correlation maps are N_grid real scalars; data
/// observations are Q*D complex coefficients, i.e. 2*Q*D real scalars.
struct TransmissionTally {
  long long grid_scalars = 0;
  long long data_coefficients = 0;
  long long real_scalars() const { return grid_scalars + 2 * data_coefficients; }
};

/// Uses the nominal N_grid = N_grid_per_axis^2 of the configuration.
inline TransmissionTally account_transmission(const SystemConfig& cfg, Estimator e) {
  TransmissionTally t;
  t.grid_scalars = cfg.n_grid_nominal();
  const bool forwards_data = is_mml(e) || e == Estimator::HDDCentr || e == Estimator::SDDCentr;
  if (forwards_data) t.data_coefficients = static_cast<long long>(cfg.Q) * cfg.D;
  return t;
}

// ---------------------------------------------------------------------------
// Trials

struct EstimatorOutcome {
  Estimator estimator = Estimator::P;
  Point2 estimate;
  double sq_error = 0.0;
  std::optional<double> ser;
  std::optional<double> mae;
  OpCounter ops;
  TransmissionTally tx;
};

struct TrialResult {
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  double sigma2 = 0.0;
  Point2 truth;
  std::vector<EstimatorOutcome> outcomes;  // in request order

  const EstimatorOutcome& at(Estimator e) const {
    for (const auto& o : outcomes) {
      if (o.estimator == e) return o;
    }
    throw std::out_of_range("TrialResult: estimator not in this trial");
  }
};

struct TrialOptions {
  std::optional<double> sigma2_override;  // e.g. 0 for noise-free runs
  bool count_ops = false;
  bool refine = true;
  unsigned grid_threads = 1;
};

/// Everything a trial needs that does not depend on the seed.
struct TrialSetup {
  SystemConfig cfg;
  std::shared_ptr<const ConstellationMap> cmap;
  SearchGrid grid;
  std::vector<Point2> nodes;

  explicit TrialSetup(SystemConfig c)
      : cfg(std::move(c)),
        cmap(std::make_shared<const ConstellationMap>(make_constellation_map(cfg))),
        grid(make_grid(cfg)),
        nodes(make_node_positions(cfg)) {}
};

struct Realization {
  Scene scene;
  ChannelRealization channel;
  ResourceGrid frame;
  Observations obs;
};

/// Draws scene, channel, frame and noise from independent streams of seed.
inline Realization draw_realization(const TrialSetup& setup, double sigma2, std::uint64_t seed) {
  Rng scene_rng = make_stream(seed, Stream::Scene);
  Rng channel_rng = make_stream(seed, Stream::Channel);
  Rng frame_rng = make_stream(seed, Stream::Frame);
  Rng noise_rng = make_stream(seed, Stream::Noise);
  Realization r;
  r.scene = {setup.nodes, draw_uniform_disk(setup.cfg.R_s, scene_rng)};
  r.channel = synthesize_channel(r.scene, setup.cfg, channel_rng);
  r.frame = build_resource_grid(setup.cfg, setup.cmap, frame_rng);
  r.obs = observe(r.channel, r.frame, sigma2, noise_rng);
  return r;
}

namespace detail {

template <class Objective>
Point2 localize(Objective&& f, const TrialSetup& setup, const TrialOptions& opt) {
  const GridSearchResult coarse = grid_search(f, setup.grid, opt.grid_threads);
  if (!opt.refine) return coarse.point;
  return nelder_mead_refine(f, coarse.point, setup.grid.cell, setup.cfg.nm_tol, setup.cfg.nm_max_iter).point;
}

}  // namespace detail

inline TrialResult run_trial(const TrialSetup& setup, double snr_db, std::span<const Estimator> estimators,
                             std::uint64_t seed, const TrialOptions& opt = {}) {
  const SystemConfig& cfg = setup.cfg;
  const double sigma2 = opt.sigma2_override ? *opt.sigma2_override : cfg.sigma2(snr_db);
  for (Estimator e : estimators) {
    if (e == Estimator::MMLOpt && enumeration_size(*setup.cmap) > static_cast<double>(cfg.enumeration_cap)) {
      throw std::length_error("run_trial: MML-opt needs more data hypotheses than the enumeration cap of " +
                              std::to_string(cfg.enumeration_cap));
    }
  }
  const Realization r = draw_realization(setup, sigma2, seed);
  const Array3<Complex>& y_pilot = r.obs.y_pilot;
  const Array3<Complex>& y_data = r.obs.y_data;

  TrialResult result;
  result.seed = seed;
  result.snr_db = snr_db;
  result.sigma2 = sigma2;
  result.truth = r.scene.ue_position;

  ObjectiveContext ctx;
  ctx.geometry = SteeringGeometry::from(cfg, setup.nodes);
  ctx.pilot_energy = r.frame.pilot_energy;
  ctx.sigma2 = sigma2;
  ctx.gamma = cfg.gamma();
  ctx.cmap = setup.cmap;

  for (Estimator e : estimators) {
    EstimatorOutcome out;
    out.estimator = e;
    out.tx = account_transmission(cfg, e);
    OpCounter* ops = opt.count_ops ? &out.ops : nullptr;
    ctx.yp_eq = pilot_equalize(y_pilot, r.frame.X, ops);

    auto pilot_obj = [&](Point2 p) { return objective_pilot(ctx, p, ops); };
    switch (e) {
      case Estimator::P:
        out.estimate = detail::localize(pilot_obj, setup, opt);
        break;
      case Estimator::PD: {
        ctx.y_eq = genie_equalize(ctx.yp_eq, y_data, r.frame.S, ops);
        out.estimate = detail::localize(
            [&](Point2 p) { return objective_equalized(ctx, p, EqualizedKind::Genie, ops); }, setup, opt);
        break;
      }
      case Estimator::HDDCentr:
      case Estimator::HDDDistr:
      case Estimator::SDDCentr:
      case Estimator::SDDDistr: {
        const Array2<Complex> h_hat = estimate_channel_lmmse(y_pilot, r.frame.X, sigma2, ctx.gamma, ops);
        DataEstimates est;
        const bool distr = is_distributed(e);
        const bool hard = e == Estimator::HDDCentr || e == Estimator::HDDDistr;
        soft_data_estimate(h_hat, y_data, sigma2, distr ? DemodMode::Distributed : DemodMode::Centralized, est,
                           ops);
        OpCounter* decision_ops = hard ? ops : nullptr;  // SDD only decides for the SER report
        if (distr) {
          est.hard_distr = hard_decision(est.soft_distr, *setup.cmap, cfg.fast_slicer, decision_ops);
          ctx.ydd_eq = hard ? dd_equalize(ctx.yp_eq, y_data, est.hard_distr, ops)
                            : dd_equalize(ctx.yp_eq, y_data, est.soft_distr, ops);
          out.ser = symbol_error_rate(est.hard_distr, r.frame.S);
          out.mae = mean_abs_error(est.soft_distr, r.frame.S);
        } else {
          est.hard_centr = hard_decision(est.soft_centr, *setup.cmap, cfg.fast_slicer, decision_ops);
          ctx.ydd_eq = dd_equalize(ctx.yp_eq, y_data, hard ? est.hard_centr : est.soft_centr, ops);
          out.ser = symbol_error_rate(est.hard_centr, r.frame.S);
          out.mae = mean_abs_error(est.soft_centr, r.frame.S);
        }
        out.estimate = detail::localize(
            [&](Point2 p) { return objective_equalized(ctx, p, EqualizedKind::DecisionDirected, ops); }, setup,
            opt);
        break;
      }
      case Estimator::MMLFast:
      case Estimator::MMLApprox: {
        ctx.y_data = y_data;
        if (e == Estimator::MMLFast) {
          out.estimate = detail::localize([&](Point2 p) { return objective_mml_fast(ctx, p, ops); }, setup, opt);
        } else {
          out.estimate =
              detail::localize([&](Point2 p) { return objective_mml_approx(ctx, p, ops); }, setup, opt);
        }
        break;
      }
      case Estimator::MMLOpt: {
        out.estimate = detail::localize(
            [&](Point2 p) {
              return objective_mml_optimal(y_pilot, y_data, r.frame.X, *setup.cmap, p, ctx.geometry, sigma2,
                                           ctx.gamma, cfg.enumeration_cap);
            },
            setup, opt);
        break;
      }
    }
    out.sq_error = std::pow(distance(out.estimate, result.truth), 2);
    result.outcomes.push_back(std::move(out));
  }
  return result;
}

inline TrialResult run_trial(const SystemConfig& cfg, double snr_db, std::span<const Estimator> estimators,
                             std::uint64_t seed, const TrialOptions& opt = {}) {
  return run_trial(TrialSetup(cfg), snr_db, estimators, seed, opt);
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  Estimator estimator = Estimator::P;
  double snr_db = 0.0;
  double rmse_m = 0.0;
  double rmse_lambda = 0.0;
  std::optional<double> ser;
  std::optional<double> mae;
  int n_trials = 0;
  long long tx_scalars_per_node = 0;
  std::vector<double> sq_errors;  // per trial, index order
};

struct SweepResult {
  SystemConfig cfg;
  std::vector<Estimator> estimators;
  std::vector<SweepRow> rows;  // estimator-major, then SNR in config order

  const SweepRow& row(Estimator e, double snr_db) const {
    for (const auto& r : rows) {
      if (r.estimator == e && r.snr_db == snr_db) return r;
    }
    throw std::out_of_range("SweepResult: no row for " + std::string(estimator_name(e)));
  }
};

inline unsigned default_thread_count() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Seeds are base_seed + trial index at every SNR point, so all estimators
/// and all SNR points of one trial index share geometry, channel, frame and
/// the normalized noise draw.
inline SweepResult run_sweep(const SystemConfig& cfg, std::span<const Estimator> estimators, unsigned threads = 0,
                             const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  cfg.validate();
  if (estimators.empty()) throw std::invalid_argument("run_sweep: no estimators requested");
  const TrialSetup setup(cfg);
  const std::size_t n_snr = cfg.snr_db.size();
  const std::size_t n_mc = static_cast<std::size_t>(cfg.n_mc);
  const std::size_t total = n_snr * n_mc;
  std::vector<TrialResult> trials(total);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t job = next.fetch_add(1);
      if (job >= total) return;
      try {
        const std::size_t s = job / n_mc;
        const std::size_t t = job % n_mc;
        trials[job] = run_trial(setup, cfg.snr_db[s], estimators, cfg.base_seed + t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
        return;
      }
      const std::size_t finished = ++done;
      if (progress) progress(finished, total);
    }
  };
  if (threads == 0) threads = default_thread_count();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(total, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult result;
  result.cfg = cfg;
  result.estimators.assign(estimators.begin(), estimators.end());
  for (std::size_t k = 0; k < estimators.size(); ++k) {
    for (std::size_t s = 0; s < n_snr; ++s) {
      SweepRow row;
      row.estimator = estimators[k];
      row.snr_db = cfg.snr_db[s];
      row.n_trials = cfg.n_mc;
      row.tx_scalars_per_node = account_transmission(cfg, estimators[k]).real_scalars();
      double se = 0.0;
      double ser = 0.0;
      double mae = 0.0;
      bool has_comm = false;
      for (std::size_t t = 0; t < n_mc; ++t) {
        const EstimatorOutcome& o = trials[s * n_mc + t].outcomes[k];
        row.sq_errors.push_back(o.sq_error);
        se += o.sq_error;
        if (o.ser) {
          has_comm = true;
          ser += *o.ser;
          mae += *o.mae;
        }
      }
      row.rmse_m = std::sqrt(se / static_cast<double>(n_mc));
      row.rmse_lambda = row.rmse_m / cfg.lambda_c();
      if (has_comm) {
        row.ser = ser / static_cast<double>(n_mc);
        row.mae = mae / static_cast<double>(n_mc);
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Ambiguity function

enum class CutAxis { X, Y };

struct AfSample {
  double coordinate = 0.0;  // position along the cut axis, m
  Point2 candidate;
  double af_coh = 0.0;      // |sum_n sum_q e^{-j phase (d_n - d~_n) q}|
  double af_noncoh = 0.0;   // sum_n |sum_q e^{...}|^2
};

/// Noise-free matched-filter response along a line through p_true parallel
/// to the chosen axis, sampled uniformly on [c - half_span, c + half_span].
inline std::vector<AfSample> ambiguity_function(std::span<const Point2> nodes, const SystemConfig& cfg, Point2 p_true,
                                                CutAxis axis, int samples, double half_span) {
  if (samples < 2) throw std::invalid_argument("ambiguity_function: samples must be >= 2");
  const double center = axis == CutAxis::X ? p_true.x : p_true.y;
  const double k = cfg.phase_per_meter();
  std::vector<AfSample> out(samples);
  for (int i = 0; i < samples; ++i) {
    const double coord = center - half_span + 2.0 * half_span * i / (samples - 1);
    const Point2 cand = axis == CutAxis::X ? Point2{coord, p_true.y} : Point2{p_true.x, coord};
    Complex coh{};
    double noncoh = 0.0;
    for (const Point2& node : nodes) {
      const double delta = distance(p_true, node) - distance(cand, node);
      const Complex rot = std::polar(1.0, -k * delta);
      Complex w{1.0, 0.0};
      Complex inner{};
      for (int q = 0; q < cfg.Q; ++q) {
        inner += w;
        w *= rot;
      }
      coh += inner;
      noncoh += std::norm(inner);
    }
    out[i] = {coord, cand, std::abs(coh), noncoh};
  }
  return out;
}

/// Width of the coherent main lobe at |AF_coh| = peak / sqrt(2), with
/// linear interpolation of both crossings. Returns NaN if a crossing lies
/// outside the sampled cut.
inline double coherent_3db_width(const std::vector<AfSample>& af) {
  if (af.size() < 3) return std::nan("");
  std::size_t peak = 0;
  for (std::size_t i = 1; i < af.size(); ++i) {
    if (af[i].af_coh > af[peak].af_coh) peak = i;
  }
  const double level = af[peak].af_coh / std::sqrt(2.0);
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double a = af[inside].af_coh;
    const double b = af[outside].af_coh;
    const double frac = (a - level) / (a - b);
    return af[inside].coordinate + frac * (af[outside].coordinate - af[inside].coordinate);
  };
  std::size_t lo = peak;
  while (lo > 0 && af[lo - 1].af_coh >= level) --lo;
  std::size_t hi = peak;
  while (hi + 1 < af.size() && af[hi + 1].af_coh >= level) ++hi;
  if (lo == 0 || hi + 1 == af.size()) return std::nan("");
  return crossing(hi, hi + 1) - crossing(lo, lo - 1);
}

// ---------------------------------------------------------------------------
// Operation accounting

struct ComplexityRow {
  std::string step;
  std::uint64_t measured = 0;
  std::string formula;
  double instantiated = 0.0;
};

struct ComplexityReport {
  Estimator estimator = Estimator::P;
  OpCounter measured;
  std::size_t grid_points = 0;
  std::vector<ComplexityRow> rows;
};

/// One trial with counters enabled and grid evaluation only (no refinement),
/// next to the asymptotic step costs instantiated with the same sizes.
inline ComplexityReport account_complexity(const SystemConfig& cfg, Estimator e, std::uint64_t seed = 1) {
  const TrialSetup setup(cfg);
  TrialOptions opt;
  opt.count_ops = true;
  opt.refine = false;
  const std::array<Estimator, 1> one{e};
  const double snr = cfg.snr_db.empty() ? 10.0 : cfg.snr_db.front();
  const TrialResult tr = run_trial(setup, snr, one, seed, opt);

  ComplexityReport rep;
  rep.estimator = e;
  rep.measured = tr.outcomes.front().ops;
  rep.grid_points = setup.grid.points.size();
  const double N = cfg.N;
  const double Q = cfg.Q;
  const double P = cfg.P;
  const double D = cfg.D;
  const double M = setup.cmap->max_order();
  const double G = static_cast<double>(rep.grid_points);
  const OpCounter& m = rep.measured;

  if (is_dd(e)) {
    rep.rows.push_back({"channel_estimation", m.channel_estimation, "N*Q*P", N * Q * P});
    rep.rows.push_back({"soft_data_estimation", m.soft_estimation, "N*Q*D", N * Q * D});
    if (e == Estimator::HDDCentr) rep.rows.push_back({"hard_data_decision", m.hard_decision, "M*Q*D", M * Q * D});
    if (e == Estimator::HDDDistr) {
      rep.rows.push_back({"hard_data_decision", m.hard_decision, "N*M*Q*D", N * M * Q * D});
    }
  }
  if (e == Estimator::P || is_mml(e)) {
    rep.rows.push_back({"symbol_equalization", m.equalization, "N*Q*P", N * Q * P});
  } else {
    rep.rows.push_back({"symbol_equalization", m.equalization, "N*Q*(P+D)", N * Q * (P + D)});
  }
  rep.rows.push_back({"localization_pilot", m.loc_pilot, "N_grid*N*Q", G * N * Q});
  if (e == Estimator::MMLFast || e == Estimator::MMLApprox) {
    rep.rows.push_back({"localization_data_combine", m.loc_data_combine, "N_grid*Q*D*N", G * Q * D * N});
    if (e == Estimator::MMLFast) {
      rep.rows.push_back(
          {"localization_data_constellation", m.loc_data_constellation, "N_grid*Q*D*sqrt(M)", G * Q * D * std::sqrt(M)});
    } else {
      rep.rows.push_back({"localization_data_constellation", m.loc_data_constellation, "N_grid*Q*D*M", G * Q * D * M});
    }
  }
  return rep;
}

}  // namespace mmloc
