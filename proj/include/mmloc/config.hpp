#pragma once

// JSON (de)serialization of SystemConfig. Keys are snake_case; unknown keys
// are rejected so that typos do not silently fall back to defaults.

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mmloc/model.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

inline std::vector<double> parse_snr_list(const nlohmann::json& v) {
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError("snr_db: list entries must be numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  if (v.is_object()) {
    for (const auto& [k, _] : v.items()) {
      if (k != "start" && k != "stop" && k != "step") throw ConfigError("snr_db: unknown range key '" + k + "'");
    }
    const double start = json_get<double>(v, "start");
    const double stop = json_get<double>(v, "stop");
    const double step = json_get<double>(v, "step");
    if (!(step > 0.0) || stop < start) throw ConfigError("snr_db: range needs step > 0 and stop >= start");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  throw ConfigError("snr_db: expected a number, a list or {start, stop, step}");
}

}  // namespace detail

/// Builds a configuration from JSON on top of the defaults and validates it.
inline SystemConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known = {
      "f_c",        "delta_f",         "q",          "p",           "d",           "n",
      "r_srx",      "r_srx_lambda",    "a_srx",      "r_s",         "r_s_lambda",  "n_grid_per_axis",
      "alpha_oversample", "snr_db",    "gamma",      "constellation", "constellation_map", "pilot_scheme",
      "n_mc",       "base_seed",       "nm_max_iter", "nm_tol",     "enumeration_cap", "fast_slicer",
      "lambda_c",   "kappa",           "sigma2"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError(k + ": unknown configuration key");
  }
  if (j.contains("r_srx") && j.contains("r_srx_lambda")) throw ConfigError("r_srx: give r_srx or r_srx_lambda, not both");
  if (j.contains("r_s") && j.contains("r_s_lambda")) throw ConfigError("r_s: give r_s or r_s_lambda, not both");

  using detail::json_get;
  SystemConfig c;
  if (j.contains("f_c")) c.f_c = json_get<double>(j, "f_c");
  if (j.contains("delta_f")) c.delta_f = json_get<double>(j, "delta_f");
  if (j.contains("q")) c.Q = json_get<int>(j, "q");
  if (j.contains("p")) c.P = json_get<int>(j, "p");
  if (j.contains("d")) c.D = json_get<int>(j, "d");
  if (j.contains("n")) c.N = json_get<int>(j, "n");
  if (j.contains("r_srx")) c.R_srx = json_get<double>(j, "r_srx");
  if (j.contains("r_srx_lambda")) c.R_srx = json_get<double>(j, "r_srx_lambda") * c.lambda_c();
  if (j.contains("a_srx")) c.A_srx = json_get<double>(j, "a_srx");
  if (j.contains("r_s")) c.R_s = json_get<double>(j, "r_s");
  if (j.contains("r_s_lambda")) c.R_s = json_get<double>(j, "r_s_lambda") * c.lambda_c();
  if (j.contains("n_grid_per_axis")) c.N_grid_per_axis = json_get<int>(j, "n_grid_per_axis");
  if (j.contains("alpha_oversample")) c.alpha_oversample = json_get<int>(j, "alpha_oversample");
  if (j.contains("snr_db")) c.snr_db = detail::parse_snr_list(j.at("snr_db"));
  if (j.contains("gamma") && !j.at("gamma").is_null()) c.gamma_override = json_get<double>(j, "gamma");
  if (j.contains("constellation")) c.constellation = json_get<int>(j, "constellation");
  if (j.contains("constellation_map") && !j.at("constellation_map").is_null()) {
    const auto& m = j.at("constellation_map");
    if (!m.is_array() || m.empty() || !m.front().is_array()) {
      throw ConfigError("constellation_map: expected a q x d array of orders");
    }
    Array2<int> orders(m.size(), m.front().size());
    for (std::size_t q = 0; q < m.size(); ++q) {
      if (!m[q].is_array() || m[q].size() != orders.cols()) {
        throw ConfigError("constellation_map: rows must all have the same length");
      }
      for (std::size_t d = 0; d < orders.cols(); ++d) {
        if (!m[q][d].is_number_integer()) throw ConfigError("constellation_map: entries must be integers");
        orders(q, d) = m[q][d].get<int>();
      }
    }
    c.constellation_orders = std::move(orders);
  }
  if (j.contains("pilot_scheme")) {
    const auto s = json_get<std::string>(j, "pilot_scheme");
    if (s == "random") {
      c.pilot_scheme = PilotScheme::Random;
    } else if (s == "ones") {
      c.pilot_scheme = PilotScheme::Ones;
    } else {
      throw ConfigError("pilot_scheme: expected \"random\" or \"ones\"");
    }
  }
  if (j.contains("n_mc")) c.n_mc = json_get<int>(j, "n_mc");
  if (j.contains("base_seed")) c.base_seed = json_get<std::uint64_t>(j, "base_seed");
  if (j.contains("nm_max_iter")) c.nm_max_iter = json_get<int>(j, "nm_max_iter");
  if (j.contains("nm_tol")) c.nm_tol = json_get<double>(j, "nm_tol");
  if (j.contains("enumeration_cap")) c.enumeration_cap = json_get<std::uint64_t>(j, "enumeration_cap");
  if (j.contains("fast_slicer")) c.fast_slicer = json_get<bool>(j, "fast_slicer");
  c.validate();
  return c;
}

/// Full snapshot; reading it back yields an identical configuration.
inline nlohmann::json config_to_json(const SystemConfig& c) {
  nlohmann::json j;
  j["f_c"] = c.f_c;
  j["delta_f"] = c.delta_f;
  j["q"] = c.Q;
  j["p"] = c.P;
  j["d"] = c.D;
  j["n"] = c.N;
  j["r_srx"] = c.R_srx;
  j["a_srx"] = c.A_srx;
  j["r_s"] = c.R_s;
  j["n_grid_per_axis"] = c.N_grid_per_axis;
  j["alpha_oversample"] = c.alpha_oversample;
  j["snr_db"] = c.snr_db;
  j["gamma"] = c.gamma_override ? nlohmann::json(*c.gamma_override) : nlohmann::json(nullptr);
  j["constellation"] = c.constellation;
  if (c.constellation_orders) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t q = 0; q < c.constellation_orders->rows(); ++q) {
      const auto r = c.constellation_orders->row(q);
      rows.push_back(std::vector<int>(r.begin(), r.end()));
    }
    j["constellation_map"] = rows;
  }
  j["pilot_scheme"] = c.pilot_scheme == PilotScheme::Random ? "random" : "ones";
  j["n_mc"] = c.n_mc;
  j["base_seed"] = c.base_seed;
  j["nm_max_iter"] = c.nm_max_iter;
  j["nm_tol"] = c.nm_tol;
  j["enumeration_cap"] = c.enumeration_cap;
  j["fast_slicer"] = c.fast_slicer;
  j["lambda_c"] = c.lambda_c();
  j["kappa"] = c.kappa();
  return j;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Accepts either a bare configuration or a run manifest holding one under
/// "config".
inline SystemConfig load_config(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  if (j.is_object() && j.contains("config") && j.at("config").is_object()) return config_from_json(j.at("config"));
  return config_from_json(j);
}

}  // namespace mmloc
