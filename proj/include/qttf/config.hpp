// Sectioned key/value configuration.
//
// Every physical quantity carries its unit in the key name (.._ps, .._km,
// .._db_per_km). Unknown keys are rejected with their full path; every
// value the reader resolves, supplied or defaulted, is echoed so reports
// can embed the complete effective configuration.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qttf/coincidence.hpp"
#include "qttf/presets.hpp"
#include "qttf/simulator.hpp"
#include "qttf/twoway.hpp"

namespace qttf {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string key;  // section.key
  std::string value;
  bool is_default = false;
};

class Config {
 public:
  static Config parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ValidationError("config line " + std::to_string(lineno) + ": unterminated section");
        section = trim(line.substr(1, line.size() - 2));
        cfg.sections_.try_emplace(section);
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
      cfg.sections_[section][key] = value;
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
  }

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Typed access with defaults; tracks consumption so finish() can reject
// anything unknown, and records every resolved value.
class ConfigReader {
 public:
  explicit ConfigReader(const Config& cfg) : cfg_(cfg) {}

  double get_double(const std::string& section, const std::string& key, double def) {
    const std::string* raw = lookup(section, key);
    if (!raw) {
      echo(section, key, format(def), true);
      return def;
    }
    try {
      std::size_t pos = 0;
      const double v = std::stod(*raw, &pos);
      if (pos != raw->size()) throw std::invalid_argument("trailing characters");
      echo(section, key, *raw, false);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("config: " + path(section, key) + ": not a number: '" + *raw + "'");
    }
  }

  long long get_int(const std::string& section, const std::string& key, long long def) {
    const std::string* raw = lookup(section, key);
    if (!raw) {
      echo(section, key, std::to_string(def), true);
      return def;
    }
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(*raw, &pos);
      if (pos != raw->size()) throw std::invalid_argument("trailing characters");
      echo(section, key, *raw, false);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("config: " + path(section, key) + ": not an integer: '" + *raw + "'");
    }
  }

  bool get_bool(const std::string& section, const std::string& key, bool def) {
    const std::string* raw = lookup(section, key);
    if (!raw) {
      echo(section, key, def ? "true" : "false", true);
      return def;
    }
    std::string v = *raw;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    echo(section, key, *raw, false);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config: " + path(section, key) + ": not a boolean: '" + *raw + "'");
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& def) {
    const std::string* raw = lookup(section, key);
    echo(section, key, raw ? *raw : def, raw == nullptr);
    return raw ? *raw : def;
  }

  // Rejects unconsumed keys and unknown sections.
  void finish() const {
    for (const auto& [section, kv] : cfg_.sections()) {
      for (const auto& [key, value] : kv) {
        if (!consumed_.count(path(section, key)))
          throw ValidationError("config: unknown key: " + path(section, key));
      }
    }
  }

  const std::vector<ConfigEntry>& resolved() const { return resolved_; }

 private:
  static std::string path(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  static std::string format(double v) {
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
  }

  const std::string* lookup(const std::string& section, const std::string& key) {
    consumed_.insert(path(section, key));
    const auto sit = cfg_.sections().find(section);
    if (sit == cfg_.sections().end()) return nullptr;
    const auto kit = sit->second.find(key);
    return kit == sit->second.end() ? nullptr : &kit->second;
  }

  void echo(const std::string& section, const std::string& key, const std::string& value,
            bool is_default) {
    resolved_.push_back({path(section, key), value, is_default});
  }

  const Config& cfg_;
  std::set<std::string> consumed_;
  std::vector<ConfigEntry> resolved_;
};

struct RunSpec {
  Scenario scenario;
  HistogramSpec histogram;
  TdevEstimator tdev_estimator = TdevEstimator::overlapping;
  bool auto_fine_window = false;  // fine_window derived from predicted FWHM
  std::vector<ConfigEntry> resolved;
};

namespace detail {

inline DriftProcess read_drift(ConfigReader& r, const std::string& prefix, double length_m) {
  const std::string kind = r.get_string("drift", prefix + "_kind", "none");
  const double amplitude = r.get_double("drift", prefix + "_amplitude_ps", 0.0) * 1e-12;
  const double period = r.get_double("drift", prefix + "_period_s", 0.0);
  const double phase = r.get_double("drift", prefix + "_phase_rad", 0.0);
  const double rw = r.get_double("drift", prefix + "_random_walk_ps_per_sqrt_s", 0.0) * 1e-12;
  const std::string trace = r.get_string("drift", prefix + "_temperature_trace", "lab-periodic");
  const double coeff =
      r.get_double("drift", prefix + "_temperature_coeff_ps_per_k_km", 38.0) * 1e-12 / 1000.0;

  DriftProcess d;
  if (kind == "none") {
    return d;
  } else if (kind == "constant") {
    d.kind = DriftKind::constant;
    d.amplitude_s = amplitude;
  } else if (kind == "sinusoidal") {
    if (!(period > 0.0))
      throw ValidationError("config: drift." + prefix + "_period_s must be > 0 for sinusoidal");
    d = sinusoidal_drift(amplitude, period, phase);
  } else if (kind == "random-walk") {
    d = random_walk_drift(rw);
  } else if (kind == "temperature-linear") {
    d.kind = DriftKind::temperature_linear;
    d.temperature_coeff_s_per_k_m = coeff;
    d.length_scale_m = length_m;
    if (trace == "lab-periodic") {
      d.temperature_trace = lab_periodic_trace(86400.0);
    } else if (trace == "lab-irregular") {
      d.temperature_trace = lab_irregular_trace(86400.0, 0x7E4Au);
    } else {
      throw ValidationError("config: drift." + prefix + "_temperature_trace: unknown trace '" +
                            trace + "'");
    }
  } else {
    throw ValidationError("config: drift." + prefix + "_kind: unknown kind '" + kind + "'");
  }
  return d;
}

inline SourceSpec read_source(ConfigReader& r, const std::string& section) {
  SourceSpec s;
  s.dl_product_s = r.get_double(section, "dl_product_ps", 2.96) * 1e-12;
  s.gamma = r.get_double(section, "gamma", 0.04822);
  s.center_wavelength_m = r.get_double(section, "center_wavelength_nm", 1560.0) * 1e-9;
  s.pair_rate_hz = r.get_double(section, "pair_rate_hz", 0.0);
  s.singles_rate_hz = r.get_double(section, "singles_rate_hz", 6000.0);
  s.heralding_efficiency = r.get_double(section, "heralding_efficiency", 1468.0 / 30000.0);
  return s;
}

inline FiberSpec read_fiber(ConfigReader& r, const std::string& section, double def_length_km,
                            double def_k2_ps2_per_km, double def_loss) {
  FiberSpec f;
  f.length_m = r.get_double(section, "length_km", def_length_km) * 1000.0;
  f.k0_per_m = r.get_double(section, "k0_per_m", 0.0);
  f.k1_s_per_m = r.get_double(section, "k1_ns_per_m", 4.89) * 1e-9;
  f.k2_s2_per_m = r.get_double(section, "k2_ps2_per_km", def_k2_ps2_per_km) * 1e-24 / 1000.0;
  f.loss_db_per_km = r.get_double(section, "loss_db_per_km", def_loss);
  return f;
}

}  // namespace detail

// Binds a parsed config document to a runnable scenario plus analysis spec.
inline RunSpec run_spec_from_config(const Config& cfg) {
  ConfigReader r(cfg);
  RunSpec out;
  Scenario& sc = out.scenario;

  sc.source_a = detail::read_source(r, "source_a");
  sc.source_b = detail::read_source(r, "source_b");
  sc.link.transmission = detail::read_fiber(r, "transmission_fiber", 20.0, -21.7, 0.2);
  sc.link.compensation = detail::read_fiber(r, "compensation_fiber", 2.49, 186.0, 0.5);
  sc.link.shared_compensation = r.get_bool("compensation_fiber", "shared", true);

  sc.jitter.detector_fwhm_s = r.get_double("jitter", "detector_fwhm_ps", 35.0) * 1e-12;
  sc.jitter.timer_fwhm_s = r.get_double("jitter", "timer_fwhm_ps", 35.0) * 1e-12;

  sc.clock_a.initial_offset_s = r.get_double("clock_a", "initial_offset_ns", 1000.0) * 1e-9;
  sc.clock_a.frequency_offset = r.get_double("clock_a", "frequency_offset", 0.0);
  sc.clock_a.random_walk_s_per_sqrt_s =
      r.get_double("clock_a", "random_walk_fs_per_sqrt_s", 0.0) * 1e-15;
  sc.clock_a.epoch_s = r.get_double("clock_a", "epoch_s", 0.0);
  sc.clock_b.initial_offset_s = r.get_double("clock_b", "initial_offset_ns", 0.0) * 1e-9;
  sc.clock_b.frequency_offset = r.get_double("clock_b", "frequency_offset", 0.0);
  sc.clock_b.random_walk_s_per_sqrt_s =
      r.get_double("clock_b", "random_walk_fs_per_sqrt_s", 0.0) * 1e-15;
  sc.clock_b.epoch_s = r.get_double("clock_b", "epoch_s", 0.0);

  sc.topology.transmission =
      detail::read_drift(r, "transmission", sc.link.transmission.length_m);
  sc.topology.compensation_a =
      detail::read_drift(r, "compensation_a", sc.link.compensation.length_m);
  sc.topology.compensation_b =
      detail::read_drift(r, "compensation_b", sc.link.compensation.length_m);
  const std::string corr = r.get_string("drift", "correlation", "shared");
  if (corr == "shared") {
    sc.topology.correlation = DcfCorrelation::shared;
  } else if (corr == "co-located") {
    sc.topology.correlation = DcfCorrelation::co_located;
  } else if (corr == "remote") {
    sc.topology.correlation = DcfCorrelation::remote;
  } else {
    throw ValidationError("config: drift.correlation: unknown value '" + corr + "'");
  }

  sc.block_duration_s = r.get_double("run", "block_duration_s", 5.0);
  sc.n_blocks = r.get_int("run", "n_blocks", 200);
  sc.background_rate_hz = r.get_double("run", "background_rate_hz", 0.0);
  sc.timer_resolution_s = r.get_double("run", "timer_resolution_ps", 1.0) * 1e-12;
  sc.rng_seed = static_cast<std::uint64_t>(r.get_int("run", "rng_seed", 42));
  sc.sinc_jsa = r.get_bool("run", "sinc_jsa", false);
  sc.k1_asymmetry_s_per_m =
      r.get_double("run", "k1_asymmetry_ps_per_km", 0.0) * 1e-12 / 1000.0;

  out.histogram.coarse_bin_s = r.get_double("analysis", "coarse_bin_ns", 1.0) * 1e-9;
  out.histogram.fine_bin_s = r.get_double("analysis", "fine_bin_ps", 1.0) * 1e-12;
  out.histogram.search_span_s = r.get_double("analysis", "search_span_us", 1000.0) * 1e-6;
  const double fine_window_ps = r.get_double("analysis", "fine_window_ps", 0.0);
  const std::string estimator = r.get_string("analysis", "tdev_estimator", "overlapping");
  if (estimator == "overlapping") {
    out.tdev_estimator = TdevEstimator::overlapping;
  } else if (estimator == "non-overlapping") {
    out.tdev_estimator = TdevEstimator::non_overlapping;
  } else {
    throw ValidationError("config: analysis.tdev_estimator: unknown value '" + estimator + "'");
  }
  r.finish();
  out.resolved = r.resolved();

  try {
    sc.validate();
    if (fine_window_ps > 0.0) {
      out.histogram.fine_window_s = fine_window_ps * 1e-12;
    } else {
      out.auto_fine_window = true;
      const double sigma = coincidence_sigma(sc.source_a, sc.link);
      out.histogram.fine_window_s =
          std::max(10.0 * observed_fwhm(sigma, sc.jitter), 50.0 * out.histogram.fine_bin_s);
    }
    out.histogram.validate();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return out;
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

inline void emit_drift(std::vector<ConfigEntry>& out, const std::string& prefix,
                       const DriftProcess& d) {
  const char* kind = "none";
  switch (d.kind) {
    case DriftKind::constant:
      kind = d.amplitude_s == 0.0 ? "none" : "constant";
      break;
    case DriftKind::sinusoidal:
      kind = "sinusoidal";
      break;
    case DriftKind::random_walk:
      kind = "random-walk";
      break;
    case DriftKind::temperature_linear:
      kind = "temperature-linear";
      break;
  }
  out.push_back({"drift." + prefix + "_kind", kind, false});
  if (d.kind == DriftKind::sinusoidal || (d.kind == DriftKind::constant && d.amplitude_s != 0.0)) {
    out.push_back({"drift." + prefix + "_amplitude_ps", fmt(d.amplitude_s * 1e12), false});
    if (d.kind == DriftKind::sinusoidal) {
      out.push_back({"drift." + prefix + "_period_s", fmt(d.period_s), false});
      out.push_back({"drift." + prefix + "_phase_rad", fmt(d.phase_rad), false});
    }
  }
  if (d.kind == DriftKind::random_walk)
    out.push_back({"drift." + prefix + "_random_walk_ps_per_sqrt_s",
                   fmt(d.random_walk_s_per_sqrt_s * 1e12), false});
  if (d.kind == DriftKind::temperature_linear) {
    out.push_back({"drift." + prefix + "_temperature_coeff_ps_per_k_km",
                   fmt(d.temperature_coeff_s_per_k_m * 1e12 * 1000.0), false});
    out.push_back({"drift." + prefix + "_length_scale_m", fmt(d.length_scale_m), false});
  }
}

}  // namespace detail

// Full effective configuration of a scenario, for report metadata.
inline std::vector<ConfigEntry> scenario_entries(
    const Scenario& sc, const HistogramSpec& hist,
    TdevEstimator estimator = TdevEstimator::overlapping) {
  using detail::fmt;
  std::vector<ConfigEntry> out;
  const auto source = [&](const std::string& sec, const SourceSpec& s) {
    out.push_back({sec + ".dl_product_ps", fmt(s.dl_product_s * 1e12), false});
    out.push_back({sec + ".gamma", fmt(s.gamma), false});
    out.push_back({sec + ".center_wavelength_nm", fmt(s.center_wavelength_m * 1e9), false});
    out.push_back({sec + ".singles_rate_hz", fmt(s.singles_rate_hz), false});
    out.push_back({sec + ".heralding_efficiency", fmt(s.heralding_efficiency), false});
  };
  const auto fiber = [&](const std::string& sec, const FiberSpec& f) {
    out.push_back({sec + ".length_km", fmt(f.length_m / 1000.0), false});
    out.push_back({sec + ".k1_ns_per_m", fmt(f.k1_s_per_m * 1e9), false});
    out.push_back({sec + ".k2_ps2_per_km", fmt(f.k2_s2_per_m * 1e24 * 1000.0), false});
    out.push_back({sec + ".loss_db_per_km", fmt(f.loss_db_per_km), false});
  };
  source("source_a", sc.source_a);
  source("source_b", sc.source_b);
  fiber("transmission_fiber", sc.link.transmission);
  fiber("compensation_fiber", sc.link.compensation);
  out.push_back({"compensation_fiber.shared", sc.link.shared_compensation ? "true" : "false", false});
  out.push_back({"jitter.detector_fwhm_ps", fmt(sc.jitter.detector_fwhm_s * 1e12), false});
  out.push_back({"jitter.timer_fwhm_ps", fmt(sc.jitter.timer_fwhm_s * 1e12), false});
  out.push_back({"clock_a.initial_offset_ns", fmt(sc.clock_a.initial_offset_s * 1e9), false});
  out.push_back({"clock_a.frequency_offset", fmt(sc.clock_a.frequency_offset), false});
  out.push_back({"clock_b.initial_offset_ns", fmt(sc.clock_b.initial_offset_s * 1e9), false});
  out.push_back({"clock_b.frequency_offset", fmt(sc.clock_b.frequency_offset), false});
  detail::emit_drift(out, "transmission", sc.topology.transmission);
  detail::emit_drift(out, "compensation_a", sc.topology.compensation_a);
  detail::emit_drift(out, "compensation_b", sc.topology.compensation_b);
  const char* corr = sc.topology.correlation == DcfCorrelation::shared
                         ? "shared"
                         : sc.topology.correlation == DcfCorrelation::co_located ? "co-located"
                                                                                 : "remote";
  out.push_back({"drift.correlation", corr, false});
  out.push_back({"run.block_duration_s", fmt(sc.block_duration_s), false});
  out.push_back({"run.n_blocks", std::to_string(sc.n_blocks), false});
  out.push_back({"run.background_rate_hz", fmt(sc.background_rate_hz), false});
  out.push_back({"run.timer_resolution_ps", fmt(sc.timer_resolution_s * 1e12), false});
  out.push_back({"run.rng_seed", std::to_string(sc.rng_seed), false});
  out.push_back({"run.sinc_jsa", sc.sinc_jsa ? "true" : "false", false});
  out.push_back({"run.k1_asymmetry_ps_per_km", fmt(sc.k1_asymmetry_s_per_m * 1e12 * 1000.0), false});
  out.push_back({"analysis.coarse_bin_ns", fmt(hist.coarse_bin_s * 1e9), false});
  out.push_back({"analysis.fine_bin_ps", fmt(hist.fine_bin_s * 1e12), false});
  out.push_back({"analysis.search_span_us", fmt(hist.search_span_s * 1e6), false});
  out.push_back({"analysis.fine_window_ps", fmt(hist.fine_window_s * 1e12), false});
  out.push_back({"analysis.tdev_estimator",
                 estimator == TdevEstimator::overlapping ? "overlapping" : "non-overlapping",
                 false});
  return out;
}

}  // namespace qttf
