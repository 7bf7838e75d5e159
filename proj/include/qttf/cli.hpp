// Command implementations behind the qttf executable. Each returns a
// Report; the binary just parses flags, calls one of these and prints.

#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qttf/config.hpp"
#include "qttf/pipeline.hpp"
#include "qttf/presets.hpp"
#include "qttf/report.hpp"

namespace qttf::cli {

struct Options {
  std::string preset;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long long> blocks;
  std::filesystem::path out_dir;
  bool full_scale = false;
};

inline std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("QTTF_OUT_DIR")) return env;
  return "qttf-out";
}

// Resolves --preset / --config (exactly one) plus overrides into a runnable
// spec.
inline RunSpec load_run_spec(const Options& opt) {
  if (!opt.preset.empty() && !opt.config_path.empty())
    throw ValidationError("give either --preset or --config, not both");
  RunSpec spec;
  if (!opt.preset.empty()) {
    spec.scenario = preset(opt.preset);
    spec.histogram = default_histogram_spec(spec.scenario);
    spec.auto_fine_window = true;
  } else if (!opt.config_path.empty()) {
    spec = run_spec_from_config(Config::parse_file(opt.config_path));
  } else {
    throw ValidationError("need --preset or --config");
  }
  if (opt.seed) spec.scenario.rng_seed = *opt.seed;
  if (opt.blocks) spec.scenario.n_blocks = *opt.blocks;
  if (opt.full_scale) spec.scenario.n_blocks = 8192;
  try {
    spec.scenario.validate();
    if (spec.auto_fine_window) {
      const double sigma = coincidence_sigma(spec.scenario.source_a, spec.scenario.link);
      spec.histogram.fine_window_s = std::max(
          10.0 * observed_fwhm(sigma, spec.scenario.jitter), 50.0 * spec.histogram.fine_bin_s);
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(e.what());
  }
  spec.resolved = scenario_entries(spec.scenario, spec.histogram, spec.tdev_estimator);
  return spec;
}

inline Report base_report(const std::string& command, const Options& opt, const RunSpec& spec) {
  Report rep;
  rep.command = command;
  rep.preset = opt.preset;
  rep.seed = spec.scenario.rng_seed;
  rep.resolved_config = spec.resolved;
  return rep;
}

// Closed-form evaluation only; no tags are generated.
inline Report cmd_predict(const Options& opt) {
  const RunSpec spec = load_run_spec(opt);
  const Scenario& sc = spec.scenario;
  Report rep = base_report("predict", opt, spec);

  const long long n = expected_coincidences(sc.source_a, sc.block_duration_s);
  const Prediction pred = predict(sc.source_a, sc.link, sc.jitter, std::max(1LL, n));
  rep.predictions["per_direction"] = prediction_json(pred);
  rep.predictions["sd_numerator_s"] = pred.sd_per_block_s * std::sqrt(static_cast<double>(pred.n_coincidences));
  rep.predictions["expected_coincidences_per_block"] = n;
  rep.predictions["expected_tags_per_block"] = sc.source_a.singles_rate_hz * sc.block_duration_s;
  return rep;
}

// Simulate and write QTTF tag files plus a metadata report.
inline Report cmd_simulate(const Options& opt) {
  const RunSpec spec = load_run_spec(opt);
  Report rep = base_report("simulate", opt, spec);
  std::filesystem::create_directories(opt.out_dir);
  const auto paths = simulate_to_files(spec.scenario, opt.out_dir);
  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : paths) {
    files.push_back({{"path", p.string()},
                     {"bytes", static_cast<std::uint64_t>(std::filesystem::file_size(p))}});
  }
  rep.measurements["files"] = files;
  rep.measurements["n_blocks"] = spec.scenario.n_blocks;
  rep.write(opt.out_dir / "report.json");
  return rep;
}

// Analyze QTTF tag files: coincidence fits per block and direction, two-way
// combination, stability statistics, CSV emission.
inline Report cmd_analyze(const Options& opt, const std::filesystem::path& in_dir) {
  RunSpec spec;
  bool have_spec = !opt.preset.empty() || !opt.config_path.empty();
  if (have_spec) {
    spec = load_run_spec(opt);
  } else {
    spec.histogram.fine_window_s = 10e-9;
    spec.resolved = {};
  }
  Report rep = base_report("analyze", opt, spec);

  const auto streams = read_tags(in_dir);
  if (streams[0].blocks.empty()) throw ValidationError("analyze: no blocks in " + in_dir.string());
  double block_duration = spec.scenario.block_duration_s;
  if (!have_spec && streams[0].blocks.size() > 1)
    block_duration = static_cast<double>(streams[0].blocks[1].epoch_s - streams[0].blocks[0].epoch_s);

  auto source = stream_source(streams);
  const AnalysisResult res =
      analyze_blocks(source, spec.histogram, block_duration, spec.tdev_estimator);

  rep.measurements = analysis_json(res);
  rep.degraded = res.degraded;
  if (have_spec) {
    const long long n = expected_coincidences(spec.scenario.source_a, block_duration);
    rep.predictions["per_direction"] =
        prediction_json(predict(spec.scenario.source_a, spec.scenario.link, spec.scenario.jitter,
                                std::max(1LL, n)));
  }

  std::filesystem::create_directories(opt.out_dir);
  write_offset_series_csv(res.series, opt.out_dir / "offset_series.csv");
  write_stability_csv(res.stability, opt.out_dir / "stability.csv");
  write_histogram_csv(res.first_hist_ab, opt.out_dir / "hist_ab.csv");
  write_histogram_csv(res.first_hist_ba, opt.out_dir / "hist_ba.csv");
  rep.write(opt.out_dir / "report.json");
  return rep;
}

// Transmission-length / DCF pairing used in the length scan.
inline double dcf_length_for(double transmission_m) {
  if (transmission_m < 3000.0) return 0.0;
  if (transmission_m < 15000.0) return 1245.0;
  return 2490.0;
}

struct ScanPoint {
  double length_m = 0.0;
  double dcf_m = 0.0;
  double mean_t0_s = 0.0;
  double se_t0_s = 0.0;
  double sd_t0_s = 0.0;
};

struct ScanOutcome {
  std::vector<ScanPoint> points;
  double slope_s_per_m = 0.0;
  double slope_se_s_per_m = 0.0;
  double sd_of_means_s = 0.0;
};

inline ScanOutcome scan_lengths(const RunSpec& base, const std::vector<double>& lengths_m) {
  if (lengths_m.empty()) throw ValidationError("scan-length: no lengths given");
  ScanOutcome out;
  for (const double length : lengths_m) {
    Scenario sc = base.scenario;
    sc.link.transmission.length_m = length;
    sc.link.compensation.length_m = dcf_length_for(length);
    sc.rng_seed = derive_seed(base.scenario.rng_seed, 0x5CA7u,
                              static_cast<std::uint64_t>(std::llround(length)));
    HistogramSpec hist = base.histogram;
    const double sigma = coincidence_sigma(sc.source_a, sc.link);
    hist.fine_window_s =
        std::max(10.0 * observed_fwhm(sigma, sc.jitter), 50.0 * hist.fine_bin_s);
    const AnalysisResult res = run_scenario(sc, hist);
    ScanPoint p;
    p.length_m = length;
    p.dcf_m = sc.link.compensation.length_m;
    p.mean_t0_s = res.summary.mean_s;
    p.sd_t0_s = res.summary.sd_s;
    p.se_t0_s = res.summary.sd_s / std::sqrt(static_cast<double>(res.series.records.size()));
    out.points.push_back(p);
  }

  // Weighted least squares of mean t0 against length.
  double wsum = 0.0, xbar = 0.0, ybar = 0.0;
  for (const auto& p : out.points) {
    const double w = 1.0 / (p.se_t0_s * p.se_t0_s);
    wsum += w;
    xbar += w * p.length_m;
    ybar += w * p.mean_t0_s;
  }
  xbar /= wsum;
  ybar /= wsum;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : out.points) {
    const double w = 1.0 / (p.se_t0_s * p.se_t0_s);
    sxx += w * (p.length_m - xbar) * (p.length_m - xbar);
    sxy += w * (p.length_m - xbar) * (p.mean_t0_s - ybar);
  }
  if (sxx > 0.0) {
    out.slope_s_per_m = sxy / sxx;
    out.slope_se_s_per_m = 1.0 / std::sqrt(sxx);
  }

  double mean = 0.0;
  for (const auto& p : out.points) mean += p.mean_t0_s;
  mean /= static_cast<double>(out.points.size());
  double var = 0.0;
  for (const auto& p : out.points) var += (p.mean_t0_s - mean) * (p.mean_t0_s - mean);
  out.sd_of_means_s = out.points.size() > 1
                          ? std::sqrt(var / static_cast<double>(out.points.size() - 1))
                          : 0.0;
  return out;
}

inline Report cmd_scan_length(const Options& opt, const std::vector<double>& lengths_m) {
  const RunSpec spec = load_run_spec(opt);
  Report rep = base_report("scan-length", opt, spec);
  const ScanOutcome scan = scan_lengths(spec, lengths_m);

  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : scan.points) {
    points.push_back({{"length_m", p.length_m},
                      {"dcf_m", p.dcf_m},
                      {"mean_t0_s", p.mean_t0_s},
                      {"se_t0_s", p.se_t0_s},
                      {"sd_t0_s", p.sd_t0_s}});
  }
  rep.measurements["points"] = points;
  rep.measurements["slope_ps_per_km"] = scan.slope_s_per_m * 1e12 * 1000.0;
  rep.measurements["slope_se_ps_per_km"] = scan.slope_se_s_per_m * 1e12 * 1000.0;
  rep.measurements["sd_of_means_ps"] = scan.sd_of_means_s * 1e12;

  std::filesystem::create_directories(opt.out_dir);
  std::ofstream csv(opt.out_dir / "length_scan.csv");
  csv << "# *_fs columns are femtoseconds (1e-15 s)\n";
  csv << "length_m,dcf_m,mean_t0_fs,se_fs,sd_fs\n";
  csv.precision(17);
  for (const auto& p : scan.points) {
    csv << p.length_m << ',' << p.dcf_m << ',' << p.mean_t0_s * kFsPerSecond << ','
        << p.se_t0_s * kFsPerSecond << ',' << p.sd_t0_s * kFsPerSecond << '\n';
  }
  rep.write(opt.out_dir / "report.json");
  return rep;
}

// End-to-end reproduction of a named scenario, comparing the Monte Carlo
// against the closed forms and the published values.
inline Report cmd_reproduce(const Options& opt) {
  if (opt.preset.empty()) throw ValidationError("reproduce: needs --preset");
  const RunSpec spec = load_run_spec(opt);
  const Scenario& sc = spec.scenario;
  Report rep = base_report("reproduce", opt, spec);

  const long long n_expected =
      std::max(1LL, expected_coincidences(sc.source_a, sc.block_duration_s));
  const Prediction pred = predict(sc.source_a, sc.link, sc.jitter, n_expected);
  rep.predictions["per_direction"] = prediction_json(pred);

  const AnalysisResult res = run_scenario(sc, spec.histogram, spec.tdev_estimator);
  rep.measurements = analysis_json(res);
  rep.degraded = res.degraded;

  const double fwhm = 0.5 * (res.mean_fwhm_ab_s + res.mean_fwhm_ba_s);
  const double t0_true = sc.clock_a.initial_offset_s - sc.clock_b.initial_offset_s;

  if (opt.preset == "paper-20km-dcf" || opt.preset == "paper-20km-nodcf" ||
      opt.preset == "paper-floor-15m" || opt.preset == "appendixB-50km") {
    const double published_fwhm = opt.preset == "paper-20km-dcf"
                                      ? 88e-12
                                      : opt.preset == "paper-20km-nodcf" ? 789e-12
                                      : opt.preset == "paper-floor-15m" ? 69.7e-12
                                                                        : pred.fwhm_observed_s;
    rep.checks.push_back(make_check("fitted FWHM vs published", published_fwhm, fwhm, 0.10));
    if (opt.preset != "appendixB-50km") {
      rep.checks.push_back(
          make_check("t0 series SD vs per-block prediction", pred.sd_per_block_s,
                     res.summary.sd_s, 0.15));
    }
    const double se_mean =
        res.summary.sd_s / std::sqrt(static_cast<double>(res.series.records.size()));
    CheckResult mean_check;
    mean_check.name = "recovered mean t0 within 3 standard errors of injected";
    mean_check.expected = t0_true;
    mean_check.measured = res.summary.mean_s;
    mean_check.tolerance_rel = 0.0;
    mean_check.pass = std::fabs(res.summary.mean_s - t0_true) <= 3.0 * se_mean;
    rep.checks.push_back(mean_check);
    if (!res.stability.tdev_s.empty()) {
      rep.checks.push_back(make_check("TDEV(tau0) consistent with series SD (white PM)",
                                      res.summary.sd_s, res.stability.tdev_s.front(), 0.15));
    }
  }

  if (opt.preset == "appendixB-50km") {
    // Loss deduction from the published 20-km baseline (0.9 ps per 5 s),
    // +6 dB one-way for the extra 30 km at 0.2 dB/km.
    Prediction base;
    base.sd_per_block_s = 0.9e-12;
    base.n_coincidences = 1468;
    const Prediction scaled = stability_vs_length(base, 20000.0, 50000.0, 0.2);
    rep.predictions["loss_scaled_sd_s"] = scaled.sd_per_block_s;
    rep.predictions["loss_scaled_n"] = scaled.n_coincidences;
    rep.predictions["extra_loss_db"] = 0.2 * 30.0;
    rep.notes.push_back(
        "loss accounting: extra one-way dB applied once per direction's signal channel; "
        "N scales by 10^(-dB/10), SD by 10^(+dB/20); baseline SD is the published 20 km value");
    rep.checks.push_back(
        make_check("loss-scaled SD vs published 1.8 ps", 1.8e-12, scaled.sd_per_block_s, 0.05));
  }

  if (opt.preset == "appendixA-two-dcf-colocated" || opt.preset == "appendixA-two-dcf-remote") {
    // Paired run against the shared-DCF baseline at the same seed.
    Options base_opt = opt;
    base_opt.preset = "appendixA-shared-dcf";
    base_opt.config_path.clear();
    RunSpec base_spec = load_run_spec(base_opt);
    const AnalysisResult base_res = run_scenario(base_spec.scenario, base_spec.histogram);
    rep.measurements["shared_baseline"] = analysis_json(base_res);
    if (!res.stability.tdev_s.empty() && !base_res.stability.tdev_s.empty()) {
      const double ratio = res.stability.tdev_s.front() / base_res.stability.tdev_s.front();
      rep.measurements["tdev_tau0_ratio_vs_shared"] = ratio;
      if (opt.preset == "appendixA-two-dcf-colocated") {
        rep.checks.push_back(
            make_check("two-DCF TDEV(tau0) penalty vs shared", std::sqrt(2.0), ratio, 0.20));
      }
    }
  }

  std::filesystem::create_directories(opt.out_dir);
  write_offset_series_csv(res.series, opt.out_dir / "offset_series.csv");
  write_stability_csv(res.stability, opt.out_dir / "stability.csv");
  write_histogram_csv(res.first_hist_ab, opt.out_dir / "hist_ab.csv");
  rep.write(opt.out_dir / "report.json");
  return rep;
}

inline void print_report(const Report& rep, std::ostream& os) {
  os << "qttf " << rep.command;
  if (!rep.preset.empty()) os << " [" << rep.preset << "]";
  os << " (seed " << rep.seed << ")\n";
  if (!rep.predictions.empty()) {
    os << "predictions (analytic):\n";
    for (auto it = rep.predictions.begin(); it != rep.predictions.end(); ++it)
      os << "  " << it.key() << " = " << it.value().dump() << "\n";
  }
  if (!rep.measurements.empty()) {
    os << "measurements (monte-carlo):\n";
    for (auto it = rep.measurements.begin(); it != rep.measurements.end(); ++it) {
      if (it.key() == "t0_stability" || it.key() == "t21_stability" ||
          it.key() == "shared_baseline" || it.key() == "files" || it.key() == "points")
        continue;  // bulky; present in report.json
      os << "  " << it.key() << " = " << it.value().dump() << "\n";
    }
  }
  for (const auto& c : rep.checks) {
    os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": measured " << c.measured
       << " expected " << c.expected;
    if (c.tolerance_rel > 0.0) os << " (tol " << c.tolerance_rel * 100.0 << "%)";
    os << "\n";
  }
  if (rep.degraded) os << "WARNING: run degraded (more than 10% of blocks skipped)\n";
}

}  // namespace qttf::cli
