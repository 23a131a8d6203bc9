// mmloc: command-line driver for sweeps, ambiguity-function cuts, oracle
// cross-checks and operation accounting.
//
// Exit codes: 0 success, 1 validation or suite failure, 2 usage/config error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mmloc/config.hpp"
#include "mmloc/experiment.hpp"
#include "mmloc/report.hpp"
#include "mmloc/validation.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<mmloc::Estimator> parse_estimator_list(const std::string& list) {
  std::vector<mmloc::Estimator> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(mmloc::parse_estimator(item));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("--estimators: no estimator given");
  return out;
}

std::string join_names(const std::vector<mmloc::Estimator>& ests) {
  std::string s;
  for (auto e : ests) {
    if (!s.empty()) s += ',';
    s += mmloc::estimator_name(e);
  }
  return s;
}

unsigned resolve_threads(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("MMLOC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return mmloc::default_thread_count();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError(path + ": cannot open output file for writing");
  return os;
}

std::string manifest_path_for(const std::string& out) {
  std::filesystem::path p(out);
  p.replace_extension(".manifest.json");
  return p.string();
}

void write_manifest(const std::string& out_path, const std::string& command, const mmloc::SystemConfig& cfg,
                    const nlohmann::json& extra, const std::string& started) {
  nlohmann::json m;
  m["tool"] = "mmloc";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = mmloc::config_to_json(cfg);
  m["base_seed"] = cfg.base_seed;
  m["outputs"] = {out_path};
  m["started_utc"] = started;
  m["finished_utc"] = utc_timestamp();
  for (const auto& [k, v] : extra.items()) m[k] = v;
  auto os = open_output(manifest_path_for(out_path));
  os << m.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string estimators;
  std::string out = "sweep.csv";
  int threads = 0;
  bool quiet = false;
};

int cmd_sweep(const SweepArgs& a) {
  const std::string started = utc_timestamp();
  const nlohmann::json raw = mmloc::read_json_file(a.config);
  const bool is_manifest = raw.is_object() && raw.contains("config");
  const mmloc::SystemConfig cfg = mmloc::config_from_json(is_manifest ? raw.at("config") : raw);

  std::string est_list = a.estimators;
  if (est_list.empty() && is_manifest && raw.contains("estimators")) est_list = raw.at("estimators").get<std::string>();
  if (est_list.empty()) est_list = "P,PD,HDD-centr,MML-fast";
  const auto ests = parse_estimator_list(est_list);

  auto os = open_output(a.out);
  const unsigned threads = resolve_threads(a.threads);
  auto progress = [&](std::size_t done, std::size_t total) {
    if (a.quiet) return;
    if (done == total || done % std::max<std::size_t>(1, total / 20) == 0) {
      std::fprintf(stderr, "\r[sweep] %zu/%zu trials", done, total);
      if (done == total) std::fprintf(stderr, "\n");
    }
  };
  const mmloc::SweepResult res = mmloc::run_sweep(cfg, ests, threads, progress);
  mmloc::write_sweep_csv(os, res);
  os.close();
  write_manifest(a.out, "sweep", cfg, {{"estimators", join_names(ests)}}, started);
  return kExitOk;
}

struct AfArgs {
  std::string config;
  std::string axis = "x";
  int samples = 801;
  double half_span = 0.0;
  double truth_x = 0.0;
  double truth_y = 0.0;
  std::string out = "af.csv";
};

int cmd_af(const AfArgs& a) {
  const std::string started = utc_timestamp();
  const mmloc::SystemConfig cfg = mmloc::load_config(a.config);
  if (a.samples < 2) throw UsageError("--samples: must be >= 2");
  if (a.axis != "x" && a.axis != "y") throw UsageError("--cut-axis: expected x or y");
  const auto axis = a.axis == "x" ? mmloc::CutAxis::X : mmloc::CutAxis::Y;
  const double half_span = a.half_span > 0.0 ? a.half_span : cfg.R_s;
  const auto nodes = mmloc::make_node_positions(cfg);
  const mmloc::Point2 truth{a.truth_x, a.truth_y};
  const auto af = mmloc::ambiguity_function(nodes, cfg, truth, axis, a.samples, half_span);
  auto os = open_output(a.out);
  mmloc::write_af_csv(os, af, nodes.size(), cfg.Q);
  os.close();
  const double width = mmloc::coherent_3db_width(af);
  write_manifest(a.out, "af", cfg,
                 {{"cut_axis", a.axis},
                  {"samples", a.samples},
                  {"half_span_m", half_span},
                  {"truth_m", {a.truth_x, a.truth_y}},
                  {"coherent_3db_width_m", std::isfinite(width) ? nlohmann::json(width) : nlohmann::json(nullptr)}},
                 started);
  return kExitOk;
}

struct OracleArgs {
  std::uint64_t seed = 1;
  std::size_t instances = 200;
};

int cmd_oracle_check(const OracleArgs& a) {
  constexpr double kFastTol = 1e-9;
  constexpr double kQuadTol = 1e-6;
  const mmloc::CheckStats fast = mmloc::check_fast_vs_approx(a.seed, a.instances);
  const mmloc::CheckStats quad = mmloc::check_marginal_vs_quadrature(a.seed, a.instances);
  const bool fast_ok = fast.max_rel_error <= kFastTol;
  const bool quad_ok = quad.max_rel_error <= kQuadTol;
  std::printf("fast_vs_approx: comparisons=%zu max_rel_error=%.3e tol=%.0e %s\n", fast.comparisons,
              fast.max_rel_error, kFastTol, fast_ok ? "PASS" : "FAIL");
  std::printf("marginal_vs_quadrature: comparisons=%zu max_rel_error=%.3e tol=%.0e %s\n", quad.comparisons,
              quad.max_rel_error, kQuadTol, quad_ok ? "PASS" : "FAIL");
  return fast_ok && quad_ok ? kExitOk : kExitFailure;
}

struct ComplexityArgs {
  std::string config;
  std::string estimators = "P,PD,HDD-centr,HDD-distr,MML-fast,MML-approx";
  std::string out = "complexity.csv";
};

int cmd_complexity(const ComplexityArgs& a) {
  const std::string started = utc_timestamp();
  const mmloc::SystemConfig cfg = mmloc::load_config(a.config);
  const auto ests = parse_estimator_list(a.estimators);
  auto os = open_output(a.out);
  mmloc::write_complexity_header(os);
  for (auto e : ests) mmloc::write_complexity_rows(os, mmloc::account_complexity(cfg, e, cfg.base_seed));
  os.close();
  write_manifest(a.out, "complexity", cfg, {{"estimators", join_names(ests)}}, started);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-node OFDM passive localization: sweeps, ambiguity cuts, oracle checks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Monte Carlo RMSE/SER/MAE sweep over SNR");
  s->add_option("config", sweep.config, "JSON config or a run manifest")->required();
  s->add_option("--estimators", sweep.estimators, "Comma-separated estimator names");
  s->add_option("--out", sweep.out, "Output CSV path");
  s->add_option("--threads", sweep.threads, "Worker threads (default: MMLOC_THREADS or all cores)");
  s->add_flag("--quiet", sweep.quiet, "No progress output");

  AfArgs af;
  auto* f = app.add_subcommand("af", "Noise-free ambiguity function along a 1-D cut");
  f->add_option("config", af.config, "JSON config")->required();
  f->add_option("--cut-axis", af.axis, "x or y");
  f->add_option("--samples", af.samples, "Number of samples along the cut");
  f->add_option("--half-span", af.half_span, "Half length of the cut in metres (default R_s)");
  f->add_option("--truth-x", af.truth_x, "True position x, m");
  f->add_option("--truth-y", af.truth_y, "True position y, m");
  f->add_option("--out", af.out, "Output CSV path");

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle-check", "Closed-form vs numerical cross-checks on tiny instances");
  o->add_option("--seed", oracle.seed, "Base seed");
  o->add_option("--instances", oracle.instances, "Random instances per suite");

  ComplexityArgs cx;
  auto* c = app.add_subcommand("complexity", "Measured vs asymptotic operation counts per processing step");
  c->add_option("config", cx.config, "JSON config")->required();
  c->add_option("--estimators", cx.estimators, "Comma-separated estimator names");
  c->add_option("--out", cx.out, "Output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_sweep(sweep);
    if (f->parsed()) return cmd_af(af);
    if (o->parsed()) return cmd_oracle_check(oracle);
    if (c->parsed()) return cmd_complexity(cx);
  } catch (const mmloc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
