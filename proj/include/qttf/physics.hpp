// Closed-form timing statistics for two-way time transfer with
// frequency-entangled photon pairs.
//
// The coincidence peak between a signal photon sent through a dispersive
// fiber and its locally detected idler has a Gaussian profile whose width
// combines the source bandwidth (through the walk-off product DL) with the
// net accumulated dispersion k2*l + k2'*l' of the transmission fiber and the
// compensation fiber. These functions are the analytic oracle the Monte
// Carlo simulator is validated against.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "qttf/units.hpp"

namespace qttf {

// Entangled-pair source parameters. Rates are as delivered to a timer port
// (i.e. after collection/transmission losses).
struct SourceSpec {
  double dl_product_s = 2.96e-12;     // crystal walk-off product D*L
  double gamma = 0.04822;             // Gaussian JSA approximation constant
  double center_wavelength_m = 1560e-9;
  double pair_rate_hz = 0.0;          // emitted pairs; 0 = unspecified
  double singles_rate_hz = 6000.0;    // detected tags per port
  double heralding_efficiency = 0.0;  // partner-detected fraction

  void validate() const {
    if (!(dl_product_s > 0.0)) throw std::domain_error("source: dl_product must be > 0");
    if (!(gamma > 0.0)) throw std::domain_error("source: gamma must be > 0");
    if (!(singles_rate_hz > 0.0)) throw std::domain_error("source: singles_rate must be > 0");
    if (heralding_efficiency < 0.0 || heralding_efficiency > 1.0)
      throw std::domain_error("source: heralding_efficiency must be in [0,1]");
  }
};

// Propagation-constant Taylor coefficients of one fiber span,
// k(w) = k0 + k1*(w-w0) + k2/2*(w-w0)^2.
struct FiberSpec {
  double length_m = 0.0;
  double k0_per_m = 0.0;
  double k1_s_per_m = 4.89e-9;  // inverse group velocity (group index ~1.468)
  double k2_s2_per_m = 0.0;
  double loss_db_per_km = 0.2;

  void validate() const {
    if (length_m < 0.0) throw std::domain_error("fiber: length must be >= 0");
    if (loss_db_per_km < 0.0) throw std::domain_error("fiber: loss must be >= 0");
  }

  double group_delay_s() const { return k1_s_per_m * length_m; }
  double dispersion_s2() const { return k2_s2_per_m * length_m; }
};

// One transmission fiber plus one dispersion-compensation fiber per
// direction. shared_compensation marks the topology where a single physical
// DCF serves both sites' idler arms.
struct LinkConfig {
  FiberSpec transmission;                 // length l
  FiberSpec compensation;                 // length l'
  bool shared_compensation = false;

  void validate() const {
    transmission.validate();
    compensation.validate();
  }

  // Net second-order dispersion k2*l + k2'*l' that the pair's differential
  // timing accumulates.
  double net_dispersion_s2() const {
    return transmission.dispersion_s2() + compensation.dispersion_s2();
  }
};

// Per-channel detection-response jitter. A coincidence involves two
// channels, each contributing detector jitter plus timer-port jitter; the
// combined differential std is the quadrature sum of all four components.
struct JitterSpec {
  double detector_fwhm_s = 35e-12;
  double timer_fwhm_s = 35e-12;

  void validate() const {
    if (detector_fwhm_s < 0.0 || timer_fwhm_s < 0.0)
      throw std::domain_error("jitter: FWHM must be >= 0");
  }

  double detector_std_s() const { return fwhm_to_sigma(detector_fwhm_s); }
  double timer_std_s() const { return fwhm_to_sigma(timer_fwhm_s); }

  // Per-tag jitter std on a single channel.
  double per_channel_std_s() const {
    return std::hypot(detector_std_s(), timer_std_s());
  }

  // Differential jitter std of one coincidence pair (two channels).
  double combined_std_s() const {
    return std::sqrt(2.0) * per_channel_std_s();
  }

  double combined_fwhm_s() const { return sigma_to_fwhm(combined_std_s()); }

  // Builds the spec whose combined pair FWHM equals the given value, split
  // equally between detector and timer components.
  static JitterSpec from_combined_fwhm(double combined_fwhm_s) {
    JitterSpec j;
    j.detector_fwhm_s = combined_fwhm_s / 2.0;
    j.timer_fwhm_s = combined_fwhm_s / 2.0;
    return j;
  }
};

// Analytic expectation for one configuration.
struct Prediction {
  double sigma_dispersion_s = 0.0;  // Gaussian sigma of the bare pair peak
  double fwhm_bare_s = 0.0;         // 2.355 * sigma
  double fwhm_observed_s = 0.0;     // after jitter convolution
  double sd_per_block_s = 0.0;      // expected per-block offset SD at n
  long long n_coincidences = 0;
};

// Sigma of the pair differential-timing distribution:
//   sigma = sqrt(gamma*(DL)^2 + ((k2*l + k2'*l')/2)^2 / (gamma*(DL)^2)).
// Minimized (= sqrt(gamma)*DL) exactly where the compensation fiber cancels
// the transmission dispersion, independent of either term's sign.
inline double coincidence_sigma(const SourceSpec& source, const LinkConfig& link) {
  source.validate();
  link.validate();
  const double gdl2 = source.gamma * source.dl_product_s * source.dl_product_s;
  const double half_net = 0.5 * link.net_dispersion_s2();
  return std::sqrt(gdl2 + (half_net * half_net) / gdl2);
}

// Quadrature convolution of the bare Gaussian width with the combined
// detection-response FWHM.
inline double observed_fwhm(double sigma_dispersion_s, const JitterSpec& jitter) {
  if (sigma_dispersion_s < 0.0) throw std::domain_error("observed_fwhm: sigma must be >= 0");
  jitter.validate();
  return std::hypot(sigma_to_fwhm(sigma_dispersion_s), jitter.combined_fwhm_s());
}

// Expected standard deviation of a per-block clock-offset estimate from n
// coincidences: sqrt(sigma^2 + jitter_std^2) / sqrt(n).
inline double per_block_sd(double sigma_dispersion_s, const JitterSpec& jitter, long long n) {
  if (sigma_dispersion_s < 0.0) throw std::domain_error("per_block_sd: sigma must be >= 0");
  jitter.validate();
  if (n < 1) throw std::domain_error("per_block_sd: n must be >= 1");
  const double j = jitter.combined_std_s();
  return std::sqrt(sigma_dispersion_s * sigma_dispersion_s + j * j) /
         std::sqrt(static_cast<double>(n));
}

// Expected coincidences per acquisition block.
inline long long expected_coincidences(const SourceSpec& source, double block_duration_s) {
  source.validate();
  if (!(block_duration_s > 0.0)) throw std::domain_error("expected_coincidences: duration must be > 0");
  return std::llround(source.singles_rate_hz * block_duration_s * source.heralding_efficiency);
}

inline Prediction predict(const SourceSpec& source, const LinkConfig& link,
                          const JitterSpec& jitter, long long n) {
  Prediction p;
  p.sigma_dispersion_s = coincidence_sigma(source, link);
  p.fwhm_bare_s = sigma_to_fwhm(p.sigma_dispersion_s);
  p.fwhm_observed_s = observed_fwhm(p.sigma_dispersion_s, jitter);
  p.n_coincidences = n;
  p.sd_per_block_s = per_block_sd(p.sigma_dispersion_s, jitter, n);
  return p;
}

// Extrapolates a known per-block SD to a longer (or shorter) link through
// the extra one-way loss: the coincidence count scales by 10^(-ddB/10), so
// the SD scales by 10^(+ddB/20). The baseline SD may be a measured value;
// only the count rescaling is applied.
inline Prediction stability_vs_length(const Prediction& base, double base_length_m,
                                      double target_length_m, double loss_db_per_km) {
  if (base_length_m < 0.0 || target_length_m < 0.0)
    throw std::domain_error("stability_vs_length: lengths must be >= 0");
  if (loss_db_per_km < 0.0) throw std::domain_error("stability_vs_length: loss must be >= 0");
  if (base.n_coincidences < 1)
    throw std::domain_error("stability_vs_length: base needs a coincidence count");
  const double delta_db = loss_db_per_km * (target_length_m - base_length_m) / 1000.0;
  const double n_scale = std::pow(10.0, -delta_db / 10.0);
  Prediction out = base;
  out.n_coincidences = std::llround(static_cast<double>(base.n_coincidences) * n_scale);
  out.sd_per_block_s = base.sd_per_block_s / std::sqrt(n_scale);
  return out;
}

}  // namespace qttf
