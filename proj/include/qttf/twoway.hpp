// Two-way combination and stability statistics.
//
// Per block, the clock difference is t0 = ((t4-t3) - (t2-t1)) / 2; the
// symmetric transmission delay cancels in the difference. Stability is
// summarized by the overlapping time deviation
//   TDEV(m*tau0) = sqrt( < (xbar_{i+2m} - 2 xbar_{i+m} + xbar_i)^2 > / 6 )
// with xbar the m-sample phase averages, plus the whole-series mean/SD.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qttf/coincidence.hpp"

namespace qttf {

struct OffsetRecord {
  std::uint64_t epoch_s = 0;
  double t21_s = 0.0;       // fitted (t2 - t1)
  double t43_s = 0.0;       // fitted (t4 - t3)
  double t0_s = 0.0;        // (t43 - t21) / 2; positive = clock A ahead
  double se_t0_s = 0.0;     // propagated fit standard errors
  long long n_coinc_ab = 0;
  long long n_coinc_ba = 0;
};

struct OffsetSeries {
  double block_duration_s = 0.0;
  std::vector<OffsetRecord> records;
  std::vector<std::uint64_t> unmatched_epochs;  // present in only one direction
};

struct StabilityCurve {
  std::string estimator = "overlapping-tdev";
  std::vector<double> tau_s;
  std::vector<double> tdev_s;
  std::vector<double> adev;              // sqrt(3) * TDEV / tau
  std::vector<double> skipped_tau_s;     // requested but not enough data
  double mean_s = 0.0;
  double sd_s = 0.0;
};

struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DirectionalFit {
  std::uint64_t epoch_s = 0;
  CoincidenceFit fit;
};

// Joins the two directional series on block epoch (tolerating blocks
// dropped from one side) and applies the two-way combination.
inline OffsetSeries combine(const std::vector<DirectionalFit>& ab,
                            const std::vector<DirectionalFit>& ba,
                            double block_duration_s) {
  OffsetSeries series;
  series.block_duration_s = block_duration_s;
  std::size_t i = 0, j = 0;
  while (i < ab.size() && j < ba.size()) {
    if (ab[i].epoch_s < ba[j].epoch_s) {
      series.unmatched_epochs.push_back(ab[i++].epoch_s);
      continue;
    }
    if (ba[j].epoch_s < ab[i].epoch_s) {
      series.unmatched_epochs.push_back(ba[j++].epoch_s);
      continue;
    }
    OffsetRecord rec;
    rec.epoch_s = ab[i].epoch_s;
    rec.t21_s = ab[i].fit.center_s;
    rec.t43_s = ba[j].fit.center_s;
    rec.t0_s = (rec.t43_s - rec.t21_s) / 2.0;
    rec.se_t0_s = 0.5 * std::hypot(ab[i].fit.center_std_error_s, ba[j].fit.center_std_error_s);
    rec.n_coinc_ab = ab[i].fit.n_coincidences;
    rec.n_coinc_ba = ba[j].fit.n_coincidences;
    series.records.push_back(rec);
    ++i;
    ++j;
  }
  while (i < ab.size()) series.unmatched_epochs.push_back(ab[i++].epoch_s);
  while (j < ba.size()) series.unmatched_epochs.push_back(ba[j++].epoch_s);

  if (series.records.empty()) {
    std::string what = "combine: no aligned epochs";
    if (!series.unmatched_epochs.empty()) {
      what += "; unmatched:";
      for (std::size_t k = 0; k < std::min<std::size_t>(8, series.unmatched_epochs.size()); ++k)
        what += " " + std::to_string(series.unmatched_epochs[k]);
    }
    throw AlignmentError(what);
  }
  return series;
}

enum class TdevEstimator { overlapping, non_overlapping };

// Time deviation of a phase series at the given averaging factors (in
// multiples of the block duration). The overlapping estimator strides the
// second differences by one sample, the non-overlapping variant by m.
// Factors that need more than the available length are reported in
// skipped_tau_s.
inline StabilityCurve tdev(const std::vector<double>& x, double tau0_s,
                           const std::vector<long long>& factors,
                           TdevEstimator estimator = TdevEstimator::overlapping) {
  StabilityCurve curve;
  curve.estimator =
      estimator == TdevEstimator::overlapping ? "overlapping-tdev" : "non-overlapping-tdev";
  const std::size_t n = x.size();

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= std::max<std::size_t>(1, n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  curve.mean_s = mean;
  curve.sd_s = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;

  for (const long long m : factors) {
    if (m < 1 || static_cast<std::size_t>(3 * m) > n) {
      curve.skipped_tau_s.push_back(static_cast<double>(m) * tau0_s);
      continue;
    }
    const auto mm = static_cast<std::size_t>(m);
    const auto avg = [&](std::size_t i) {
      double s = 0.0;
      for (std::size_t j = i; j < i + mm; ++j) s += x[j];
      return s / static_cast<double>(mm);
    };
    const std::size_t stride = estimator == TdevEstimator::overlapping ? 1 : mm;
    double sum = 0.0;
    std::size_t terms = 0;
    for (std::size_t i = 0; i + 3 * mm <= n; i += stride) {
      const double d = avg(i + 2 * mm) - 2.0 * avg(i + mm) + avg(i);
      sum += d * d;
      ++terms;
    }
    const double t = static_cast<double>(m) * tau0_s;
    const double dev = std::sqrt(sum / (6.0 * static_cast<double>(terms)));
    curve.tau_s.push_back(t);
    curve.tdev_s.push_back(dev);
    curve.adev.push_back(std::sqrt(3.0) * dev / t);
  }
  return curve;
}

inline std::vector<long long> octave_factors(std::size_t series_length) {
  std::vector<long long> factors;
  for (long long m = 1; static_cast<std::size_t>(3 * m) <= series_length; m *= 2)
    factors.push_back(m);
  return factors;
}

inline StabilityCurve tdev(const OffsetSeries& series, const std::vector<long long>& factors,
                           TdevEstimator estimator = TdevEstimator::overlapping) {
  std::vector<double> x;
  x.reserve(series.records.size());
  for (const auto& r : series.records) x.push_back(r.t0_s);
  return tdev(x, series.block_duration_s, factors, estimator);
}

inline StabilityCurve tdev(const OffsetSeries& series,
                           TdevEstimator estimator = TdevEstimator::overlapping) {
  return tdev(series, octave_factors(series.records.size()), estimator);
}

struct SeriesSummary {
  double mean_s = 0.0;
  double sd_s = 0.0;
  double drift_slope_s_per_s = 0.0;  // least-squares slope vs epoch
};

inline SeriesSummary summarize(const std::vector<std::uint64_t>& epochs,
                               const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty series");
  SeriesSummary s;
  const std::size_t n = values.size();
  for (double v : values) s.mean_s += v;
  s.mean_s /= static_cast<double>(n);
  if (n == 1) return s;

  double var = 0.0;
  for (double v : values) var += (v - s.mean_s) * (v - s.mean_s);
  s.sd_s = std::sqrt(var / static_cast<double>(n - 1));

  double tbar = 0.0;
  for (auto e : epochs) tbar += static_cast<double>(e);
  tbar /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(epochs[i]) - tbar;
    sxx += dt * dt;
    sxy += dt * (values[i] - s.mean_s);
  }
  s.drift_slope_s_per_s = sxx > 0.0 ? sxy / sxx : 0.0;
  return s;
}

inline SeriesSummary summarize(const OffsetSeries& series) {
  std::vector<std::uint64_t> epochs;
  std::vector<double> values;
  epochs.reserve(series.records.size());
  values.reserve(series.records.size());
  for (const auto& r : series.records) {
    epochs.push_back(r.epoch_s);
    values.push_back(r.t0_s);
  }
  return summarize(epochs, values);
}

}  // namespace qttf
