#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsm/fitkit.hpp"
#include "qsm/knoise.hpp"
#include "qsm/krausgate.hpp"
#include "qsm/lindblad.hpp"
#include "qsm/qsm_circuit.hpp"
#include "qsm/transpile.hpp"

namespace qsm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Flat key=value configuration. Section headers organize the file but keys
// address a single flat namespace; a JSON object (optionally one level of
// nesting) is accepted interchangeably.
struct RunConfig {
  std::string command;
  std::map<std::string, std::string> raw;

  bool has(const std::string& key) const { return raw.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback = "") const {
    auto it = raw.find(key);
    return it == raw.end() ? fallback : it->second;
  }
  std::string require(const std::string& key) const {
    auto it = raw.find(key);
    if (it == raw.end()) throw ConfigError("config: missing required key '" + key + "'");
    return it->second;
  }
  double get_double(const std::string& key, std::optional<double> fallback = {}) const {
    auto it = raw.find(key);
    if (it == raw.end()) {
      if (fallback) return *fallback;
      throw ConfigError("config: missing required key '" + key + "'");
    }
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not a number: '" + it->second + "'");
    }
  }
  long get_int(const std::string& key, std::optional<long> fallback = {}) const {
    auto it = raw.find(key);
    if (it == raw.end()) {
      if (fallback) return *fallback;
      throw ConfigError("config: missing required key '" + key + "'");
    }
    try {
      std::size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not an integer: '" + it->second + "'");
    }
  }
  bool get_bool(const std::string& key, bool fallback) const {
    auto it = raw.find(key);
    if (it == raw.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: '" + it->second + "'");
  }
  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(require(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' has a non-numeric entry '" + item + "'");
      }
    }
    if (out.empty()) throw ConfigError("config: key '" + key + "' is empty");
    return out;
  }
};

namespace detail {

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "command", "n", "L", "k", "nu1", "nu2", "sigma", "realizations", "T1_us", "T2_us",
      "cnot_ns", "sx_ns", "mode", "topology", "t_max", "dt", "regime", "ic_policy", "ics", "p0",
      "seed", "threads", "out", "format", "fit_kind", "model", "series_localized",
      "series_diffusive", "series", "window_lo", "window_hi", "gates_per_step", "f0", "f1",
      "m_cnot", "t_step_us"};
  return keys;
}

inline void check_key_known(const std::string& key, int lineno) {
  for (const auto& k : known_config_keys())
    if (k == key) return;
  throw ConfigError("config: unknown key '" + key + "'" +
                    (lineno > 0 ? " at line " + std::to_string(lineno) : ""));
}

inline std::string json_value_to_string(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_array()) {
    std::string s;
    for (const auto& e : v) {
      if (!s.empty()) s += ',';
      s += json_value_to_string(e, key);
    }
    return s;
  }
  throw ConfigError("config: key '" + key + "' has an unsupported JSON value type");
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  // JSON mirror: first non-space character decides the format
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    std::function<void(const nlohmann::json&)> load = [&](const nlohmann::json& obj) {
      for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (it.value().is_object()) {
          load(it.value());  // one level of section nesting
          continue;
        }
        detail::check_key_known(it.key(), 0);
        if (cfg.raw.count(it.key()))
          throw ConfigError("config: duplicate key '" + it.key() + "'");
        cfg.raw[it.key()] = detail::json_value_to_string(it.value(), it.key());
      }
    };
    load(j);
  } else {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("config: malformed section header at line " + std::to_string(lineno));
        continue;  // sections are organizational only
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config: expected key=value at line " + std::to_string(lineno));
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      detail::check_key_known(key, lineno);
      if (cfg.raw.count(key))
        throw ConfigError("config: duplicate key '" + key + "' at line " + std::to_string(lineno));
      cfg.raw[key] = value;
    }
  }
  cfg.command = cfg.require("command");
  const std::vector<std::string> commands = {"evolve",     "echo-lindblad", "echo-kraus",
                                             "echo-param", "echo-combined", "circuit",
                                             "theory",     "fit"};
  bool ok = false;
  for (const auto& c : commands) ok = ok || c == cfg.command;
  if (!ok) throw ConfigError("config: unknown command '" + cfg.command + "'");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace detail {

inline constexpr const char* kVersion = "0.1.0";

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << contents;
}

inline nlohmann::json provenance(const RunConfig& cfg) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["command"] = cfg.command;
  nlohmann::json c;
  for (const auto& [k, v] : cfg.raw) c[k] = v;
  j["config"] = c;
  j["seed"] = cfg.get_string("seed", "1");
  return j;
}

inline std::string series_csv(const FidelitySeries& s) {
  std::string out = "t_fb_map_steps,fidelity_dimensionless,stderr_dimensionless\n";
  for (std::size_t i = 0; i < s.times.size(); ++i)
    out += format_double(s.times[i]) + "," + format_double(s.values[i]) + "," +
           format_double(s.stderrs[i]) + "\n";
  return out;
}

inline void write_series(const std::filesystem::path& dir, const std::string& stem,
                         const FidelitySeries& s, const RunConfig& cfg,
                         const std::string& format) {
  if (format == "csv" || format == "both") write_file(dir / (stem + ".csv"), series_csv(s));
  nlohmann::json meta = provenance(cfg);
  for (const auto& [k, v] : s.meta) meta["series"][k] = v;
  if (format == "json" || format == "both") {
    nlohmann::json j = meta;
    j["t_fb_map_steps"] = s.times;
    j["fidelity_dimensionless"] = s.values;
    j["stderr_dimensionless"] = s.stderrs;
    write_file(dir / (stem + ".json"), j.dump(2) + "\n");
  }
  write_file(dir / (stem + ".meta.json"), meta.dump(2) + "\n");
}

inline FidelitySeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("fit: cannot open series '" + path + "'");
  FidelitySeries s;
  std::string line;
  bool header = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    double t, f, se;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &f, &se) != 3)
      throw ConfigError("fit: bad CSV row in '" + path + "' line " + std::to_string(lineno));
    s.times.push_back(t);
    s.values.push_back(f);
    s.stderrs.push_back(se);
  }
  if (s.times.empty()) throw ConfigError("fit: series '" + path + "' has no rows");
  return s;
}

inline QsmParams params_from(const RunConfig& cfg, double k) {
  return QsmParams(int(cfg.get_int("n", 3)), int(cfg.get_int("L", 1)), k);
}

inline std::vector<int> ic_set_from(const RunConfig& cfg, int n) {
  const std::string policy = cfg.get_string("ic_policy", "all");
  if (policy == "all") return all_momenta(n);
  if (policy == "exclude-symmetric") return param_noise_ics(n, true);
  if (policy == "explicit") {
    std::vector<int> ics;
    for (double v : cfg.get_double_list("ics")) ics.push_back(int(std::lround(v)));
    if (ics.empty()) throw ConfigError("config: explicit ic_policy needs 'ics'");
    return ics;
  }
  throw ConfigError("config: unknown ic_policy '" + policy + "'");
}

inline LindbladMode mode_from(const RunConfig& cfg) {
  const std::string m = cfg.get_string("mode", "all-qubits");
  if (m == "all-qubits") return LindbladMode::continuous_all_qubits;
  if (m == "alternating-pairs") return LindbladMode::alternating_pairs;
  throw ConfigError("config: unknown mode '" + m + "'");
}

inline Topology topology_from(const RunConfig& cfg) {
  const std::string t = cfg.get_string("topology", "linear");
  if (t == "linear") return Topology::linear;
  if (t == "all-to-all") return Topology::all_to_all;
  throw ConfigError("config: unknown topology '" + t + "'");
}

inline Regime regime_from(const std::string& r) {
  if (r == "localized") return Regime::localized;
  if (r == "superposition") return Regime::superposition;
  if (r == "diffusive") return Regime::diffusive;
  if (r == "semi-localized") return Regime::semi_localized;
  throw ConfigError("config: unknown regime '" + r + "'");
}

inline std::string k_tag(double k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", k);
  return buf;
}

}  // namespace detail

// Executes one parsed configuration, writing artifacts under cfg 'out'.
// Throws ConfigError for configuration problems and engine exceptions for
// numerical ones; the CLI wrapper maps these to exit codes 2 and 3.
inline void run_config(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path out_dir = cfg.get_string("out", "out");
  fs::create_directories(out_dir);
  const std::string format = cfg.get_string("format", "csv");
  if (format != "csv" && format != "json" && format != "both")
    throw ConfigError("config: format must be csv, json, or both");
  const std::uint64_t seed = std::uint64_t(cfg.get_int("seed", 1));
  const int threads = int(cfg.get_int("threads", 1));
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  const int t_max = int(cfg.get_int("t_max", 10));

  if (cfg.command == "evolve") {
    for (double k : cfg.get_double_list("k")) {
      const QsmParams params = detail::params_from(cfg, k);
      const int p0 = int(cfg.get_int("p0", 0));
      StateVector psi = basis_state(params.n, p0);
      std::string csv = "t_map_steps,p_momentum,probability_dimensionless\n";
      const DftPlan plan(params.n);
      for (int t = 0; t <= t_max; ++t) {
        for (int i = 0; i < params.dim(); ++i)
          csv += std::to_string(t) + "," + std::to_string(momentum_of_index(params.n, i)) + "," +
                 format_double(std::norm(psi.amplitudes[i])) + "\n";
        if (t < t_max) apply_step(psi.amplitudes, params, params.k, Direction::forward, plan);
      }
      detail::write_file(out_dir / ("evolve_k" + detail::k_tag(k) + ".csv"), csv);
      detail::write_file(out_dir / ("evolve_k" + detail::k_tag(k) + ".meta.json"),
                         detail::provenance(cfg).dump(2) + "\n");
    }
    return;
  }

  if (cfg.command == "echo-lindblad") {
    const NoiseRates rates(cfg.get_double("nu1"), cfg.get_double("nu2"));
    for (double k : cfg.get_double_list("k")) {
      const QsmParams params = detail::params_from(cfg, k);
      EchoOptions opts;
      opts.threads = threads;
      const FidelitySeries s = echo_lindblad(params, rates, t_max, detail::mode_from(cfg),
                                             detail::ic_set_from(cfg, params.n), opts);
      detail::write_series(out_dir, "echo_lindblad_k" + detail::k_tag(k), s, cfg, format);
    }
    return;
  }

  if (cfg.command == "echo-kraus") {
    const GateNoiseConfig gate_cfg = [&] {
      GateNoiseConfig g(cfg.get_double("T1_us") * 1e-6, cfg.get_double("T2_us") * 1e-6);
      g.durations[GateKind::CNOT] = cfg.get_double("cnot_ns", 350.0) * 1e-9;
      g.durations[GateKind::SX] = cfg.get_double("sx_ns", 35.0) * 1e-9;
      g.durations[GateKind::X] = g.durations[GateKind::SX];
      return g;
    }();
    for (double k : cfg.get_double_list("k")) {
      const QsmParams params = detail::params_from(cfg, k);
      const FidelitySeries s = echo_kraus(params, gate_cfg, t_max,
                                          detail::ic_set_from(cfg, params.n),
                                          detail::topology_from(cfg), threads);
      detail::write_series(out_dir, "echo_kraus_k" + detail::k_tag(k), s, cfg, format);
    }
    return;
  }

  if (cfg.command == "echo-param" || cfg.command == "echo-combined") {
    const std::string policy = cfg.get_string("ic_policy", "exclude-symmetric");
    if (policy != "all" && policy != "exclude-symmetric")
      throw ConfigError("config: " + cfg.command + " supports ic_policy all|exclude-symmetric");
    const bool exclude = policy != "all";
    const ParamNoiseConfig noise(cfg.get_double("sigma"), int(cfg.get_int("realizations", 100)),
                                 seed, exclude);
    for (double k : cfg.get_double_list("k")) {
      const QsmParams params = detail::params_from(cfg, k);
      FidelitySeries s;
      if (cfg.command == "echo-param") {
        s = echo_param_noise(params, noise, t_max, threads);
      } else {
        const NoiseRates rates(cfg.get_double("nu1"), cfg.get_double("nu2"));
        s = echo_combined(params, noise, rates, t_max, detail::mode_from(cfg), threads);
      }
      const std::string stem = (cfg.command == "echo-param" ? "echo_param_k" : "echo_combined_k") +
                               detail::k_tag(k);
      detail::write_series(out_dir, stem, s, cfg, format);
    }
    return;
  }

  if (cfg.command == "circuit") {
    const double k = cfg.get_double_list("k").front();
    const QsmParams params = detail::params_from(cfg, k);
    const Topology topo = detail::topology_from(cfg);
    const Circuit logical = qsm_circuit(params, Direction::forward);
    const Circuit routed = route(logical, topo);
    const Circuit native = lower_native(routed);
    const Circuit optimized = peephole(native);
    nlohmann::json census = detail::provenance(cfg);
    census["n"] = params.n;
    census["k"] = k;
    census["topology"] = topology_name(topo);
    auto census_of = [](const Circuit& c) {
      nlohmann::json j;
      for (const auto& [name, count] : gate_counts(c).counts) j[name] = count;
      j["two_qubit_depth"] = gate_counts(c).two_qubit_depth;
      return j;
    };
    census["logical"] = census_of(logical);
    census["native"] = census_of(native);
    census["optimized"] = census_of(optimized);
    census["cnot_before_opt"] = gate_counts(native).at("CNOT");
    census["cnot_after_opt"] = gate_counts(optimized).at("CNOT");
    detail::write_file(out_dir / "circuit_census.json", census.dump(2) + "\n");
    detail::write_file(out_dir / "qsm_forward_logical.circ", serialize(routed));
    detail::write_file(out_dir / "qsm_forward_native.circ", serialize(optimized));
    return;
  }

  if (cfg.command == "theory") {
    const NoiseRates rates(cfg.get_double("nu1"), cfg.get_double("nu2"));
    const Regime regime = detail::regime_from(cfg.require("regime"));
    const int n = int(cfg.get_int("n", 3));
    const double dt = cfg.get_double("dt", 0.5);
    if (dt <= 0.0) throw ConfigError("config: dt must be positive");
    FidelitySeries s;
    for (double t = 0.0; t <= double(t_max) + 1e-12; t += dt) {
      s.times.push_back(t);
      s.values.push_back(regime_fidelity(regime, n, rates, t));
      s.stderrs.push_back(0.0);
    }
    s.meta["engine"] = "closed-form";
    s.meta["regime"] = regime_name(regime);
    s.meta["n"] = std::to_string(n);
    detail::write_series(out_dir, std::string("theory_") + regime_name(regime), s, cfg, format);
    return;
  }

  if (cfg.command == "fit") {
    const std::string kind = cfg.get_string("fit_kind", "rates");
    nlohmann::json report = detail::provenance(cfg);
    auto result_json = [](const FitResult& r) {
      nlohmann::json j;
      j["model"] = r.model;
      for (const auto& [k, v] : r.params) j["params"][k] = v;
      for (const auto& [k, v] : r.stderrs) j["stderr"][k] = v;
      j["residual_rms"] = r.residual_rms;
      j["window"] = {r.window_lo, r.window_hi};
      j["converged"] = r.converged;
      return j;
    };
    if (kind == "rates") {
      const FidelitySeries loc = detail::read_series_csv(cfg.require("series_localized"));
      const FidelitySeries dif = detail::read_series_csv(cfg.require("series_diffusive"));
      RatesFitContext ctx;
      ctx.n = int(cfg.get_int("n", 3));
      ctx.gates_per_step = int(cfg.get_int("gates_per_step", 33));
      ctx.threads = threads;
      ctx.t_step_seconds = cfg.get_double("t_step_us", 11.55) * 1e-6;
      const std::string model = cfg.get_string("model", "gate-based-serial");
      RatesModel m;
      if (model == "gate-based-serial") m = RatesModel::gate_based_serial;
      else if (model == "lindblad-sim") m = RatesModel::lindblad_sim;
      else if (model == "kraus-sim") m = RatesModel::kraus_sim;
      else throw ConfigError("config: unknown fit model '" + model + "'");
      report["result"] = result_json(fit_rates(loc, dif, m, ctx));
    } else if (kind == "exp-plateau") {
      const FidelitySeries s = detail::read_series_csv(cfg.require("series"));
      report["result"] = result_json(fit_exp_plateau(s, int(cfg.get_int("n", 3))));
    } else if (kind == "algebraic") {
      const FidelitySeries s = detail::read_series_csv(cfg.require("series"));
      report["result"] = result_json(fit_algebraic(s, cfg.get_double("window_lo"),
                                                   cfg.get_double("window_hi"),
                                                   int(cfg.get_int("n", 3))));
    } else if (kind == "cnot-error") {
      const double eps = extract_cnot_error(cfg.get_double("f0"), cfg.get_double("f1"),
                                            int(cfg.get_int("n", 3)),
                                            int(cfg.get_int("m_cnot", 66)));
      report["result"]["epsilon_per_cnot"] = eps;
    } else {
      throw ConfigError("config: unknown fit_kind '" + kind + "'");
    }
    detail::write_file(out_dir / "fit_report.json", report.dump(2) + "\n");
    return;
  }

  throw ConfigError("config: unhandled command '" + cfg.command + "'");
}

}  // namespace qsm
