// Run reports and CSV emission.
//
// Reports label every number as analytic (closed form) or monte-carlo
// (measured on simulated tags) and embed the fully resolved configuration
// plus the seed, so any report is reproducible from its own metadata.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qttf/config.hpp"
#include "qttf/pipeline.hpp"
#include "qttf/version.hpp"

namespace qttf {

struct CheckResult {
  std::string name;
  double expected = 0.0;
  double measured = 0.0;
  double tolerance_rel = 0.0;
  bool pass = false;
};

inline CheckResult make_check(const std::string& name, double expected, double measured,
                              double tolerance_rel) {
  CheckResult c{name, expected, measured, tolerance_rel, false};
  c.pass = std::fabs(measured - expected) <= tolerance_rel * std::fabs(expected);
  return c;
}

struct Report {
  std::string command;
  std::string preset;
  std::uint64_t seed = 0;
  std::vector<ConfigEntry> resolved_config;
  nlohmann::json predictions = nlohmann::json::object();   // analytic values
  nlohmann::json measurements = nlohmann::json::object();  // monte-carlo values
  std::vector<CheckResult> checks;
  bool degraded = false;
  std::vector<std::string> notes;

  bool all_checks_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = "qttf";
    j["version"] = kVersion;
    j["command"] = command;
    if (!preset.empty()) j["preset"] = preset;
    j["seed"] = seed;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& e : resolved_config) {
      cfg[e.key] = {{"value", e.value}, {"default", e.is_default}};
    }
    j["resolved_config"] = cfg;
    j["predictions"] = predictions;      // every entry here is analytic
    j["measurements"] = measurements;    // every entry here is monte-carlo
    j["labels"] = {{"predictions", "analytic"}, {"measurements", "monte-carlo"}};
    nlohmann::json checks_json = nlohmann::json::array();
    for (const auto& c : checks) {
      checks_json.push_back({{"name", c.name},
                             {"expected", c.expected},
                             {"measured", c.measured},
                             {"tolerance_rel", c.tolerance_rel},
                             {"pass", c.pass}});
    }
    j["checks"] = checks_json;
    j["degraded"] = degraded;
    j["notes"] = notes;
    return j;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("report: cannot write " + path.string());
    out << to_json().dump(2) << "\n";
  }
};

inline nlohmann::json prediction_json(const Prediction& p) {
  return {{"sigma_dispersion_s", p.sigma_dispersion_s},
          {"fwhm_bare_s", p.fwhm_bare_s},
          {"fwhm_observed_s", p.fwhm_observed_s},
          {"sd_per_block_s", p.sd_per_block_s},
          {"n_coincidences", p.n_coincidences}};
}

inline nlohmann::json stability_json(const StabilityCurve& curve) {
  nlohmann::json j;
  j["estimator"] = curve.estimator;
  j["tau_s"] = curve.tau_s;
  j["tdev_s"] = curve.tdev_s;
  j["adev"] = curve.adev;
  if (!curve.skipped_tau_s.empty()) j["skipped_tau_s"] = curve.skipped_tau_s;
  return j;
}

inline nlohmann::json analysis_json(const AnalysisResult& res) {
  nlohmann::json j;
  j["blocks_total"] = res.blocks_total;
  j["blocks_skipped"] = res.blocks_skipped;
  j["degraded"] = res.degraded;
  j["t0_mean_s"] = res.summary.mean_s;
  j["t0_sd_s"] = res.summary.sd_s;
  j["t0_drift_slope_s_per_s"] = res.summary.drift_slope_s_per_s;
  j["t21_mean_s"] = res.summary_t21.mean_s;
  j["t21_sd_s"] = res.summary_t21.sd_s;
  j["t43_mean_s"] = res.summary_t43.mean_s;
  j["t43_sd_s"] = res.summary_t43.sd_s;
  j["fwhm_ab_s"] = res.mean_fwhm_ab_s;
  j["fwhm_ba_s"] = res.mean_fwhm_ba_s;
  j["n_coinc_ab"] = res.mean_n_ab;
  j["n_coinc_ba"] = res.mean_n_ba;
  j["t0_stability"] = stability_json(res.stability);
  j["t21_stability"] = stability_json(res.stability_t21);
  return j;
}

// CSV schemas. *_fs columns are femtoseconds (1e-15 s); *_s columns are SI
// seconds.
inline void write_offset_series_csv(const OffsetSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("csv: cannot write " + path.string());
  out << "# *_fs columns are femtoseconds (1e-15 s)\n";
  out << "epoch_s,t21_fs,t43_fs,t0_fs,se_fs\n";
  out.precision(17);
  for (const auto& r : series.records) {
    out << r.epoch_s << ',' << r.t21_s * kFsPerSecond << ',' << r.t43_s * kFsPerSecond << ','
        << r.t0_s * kFsPerSecond << ',' << r.se_t0_s * kFsPerSecond << '\n';
  }
}

inline void write_stability_csv(const StabilityCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("csv: cannot write " + path.string());
  out << "# tdev_fs is femtoseconds (1e-15 s); adev is dimensionless (sqrt(3)*TDEV/tau)\n";
  out << "# estimator: " << curve.estimator << "\n";
  out << "tau_s,tdev_fs,adev\n";
  out.precision(17);
  for (std::size_t i = 0; i < curve.tau_s.size(); ++i) {
    out << curve.tau_s[i] << ',' << curve.tdev_s[i] * kFsPerSecond << ',' << curve.adev[i] << '\n';
  }
}

inline void write_histogram_csv(const Histogram& hist, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("csv: cannot write " + path.string());
  out << "# bin_center_fs is femtoseconds (1e-15 s)\n";
  out << "bin_center_fs,counts\n";
  out.precision(17);
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    out << hist.bin_center_fs(i) << ',' << hist.counts[i] << '\n';
  }
}

}  // namespace qttf
