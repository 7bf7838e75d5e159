// Coincidence-peak recovery from two tag sequences.
//
// Two-stage cross-correlation: a coarse histogram over the full search span
// locates the peak, a fine histogram around it feeds a Gaussian-plus-
// constant least-squares fit. Both passes sweep the sorted sequences with
// two pointers, so the cost is O(n + m + pairs-in-span), never the full
// product.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qttf/units.hpp"

namespace qttf {

struct HistogramSpec {
  double coarse_bin_s = 1e-9;
  double fine_bin_s = 1e-12;
  double search_span_s = 1e-3;    // histogram covers +-search_span
  double fine_window_s = 10e-9;   // fine pass covers +-fine_window around the coarse peak

  void validate() const {
    if (!(fine_bin_s > 0.0) || !(coarse_bin_s > 0.0) || !(search_span_s > 0.0) ||
        !(fine_window_s > 0.0))
      throw std::invalid_argument("histogram spec: all widths must be > 0");
    if (fine_bin_s > coarse_bin_s || coarse_bin_s > search_span_s)
      throw std::invalid_argument("histogram spec: need fine_bin <= coarse_bin <= search_span");
  }
};

struct Histogram {
  TimeFs lo_fs = 0;   // left edge of bin 0
  TimeFs bin_fs = 1;  // bin width
  std::vector<std::uint64_t> counts;

  double bin_center_fs(std::size_t i) const {
    return static_cast<double>(lo_fs) + (static_cast<double>(i) + 0.5) * static_cast<double>(bin_fs);
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

struct CoincidenceFit {
  double center_s = 0.0;            // peak position = registration time difference
  double fwhm_s = 0.0;
  double amplitude = 0.0;           // counts per bin at the peak
  long long n_coincidences = 0;     // integrated counts within +-3 sigma above background
  double background_level = 0.0;    // counts per bin
  double center_std_error_s = 0.0;  // ~ sigma / sqrt(n)
  double fit_rms_residual = 0.0;    // counts per bin
};

struct NoPeakError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
  FitError(const std::string& what, CoincidenceFit fb)
      : std::runtime_error(what), fallback(fb) {}
  CoincidenceFit fallback;  // moment-based estimate
};

namespace detail {

// Counts pairwise differences t_b - t_a falling into [lo, lo + nbins*bin).
// Both inputs must be sorted ascending.
inline void sweep_histogram(const std::vector<TimeFs>& a, const std::vector<TimeFs>& b,
                            TimeFs lo, TimeFs bin, Histogram& out) {
  out.lo_fs = lo;
  out.bin_fs = bin;
  const TimeFs span = static_cast<TimeFs>(out.counts.size()) * bin;
  std::size_t w_lo = 0, w_hi = 0;
  for (const TimeFs ta : a) {
    const TimeFs bmin = ta + lo;
    const TimeFs bmax = ta + lo + span;
    while (w_lo < b.size() && b[w_lo] < bmin) ++w_lo;
    if (w_hi < w_lo) w_hi = w_lo;
    while (w_hi < b.size() && b[w_hi] < bmax) ++w_hi;
    for (std::size_t j = w_lo; j < w_hi; ++j) {
      ++out.counts[static_cast<std::size_t>((b[j] - bmin) / bin)];
    }
  }
}

// Smallest count k for which nbins bins of Poisson(mean) produce a value
// >= k with probability below ~1e-4. Guards the peak detection against the
// expected extremes of a flat histogram with millions of bins.
inline double poisson_multiplicity_bound(double mean, std::size_t nbins) {
  if (mean <= 0.0) return 1.0;
  if (mean > 30.0)
    return mean + std::sqrt(2.0 * mean * std::log(static_cast<double>(nbins) * 1e4)) + 1.0;
  double pmf = std::exp(-mean);
  double cdf = pmf;
  double k = 0.0;
  while (true) {
    const double tail = 1.0 - cdf;
    if (tail * static_cast<double>(nbins) <= 1e-4) return k + 1.0;
    k += 1.0;
    pmf *= mean / k;
    cdf += pmf;
    if (k > mean + 400.0) return k;  // unreachable in practice
  }
}

inline bool solve4(std::array<std::array<double, 4>, 4>& m, std::array<double, 4>& rhs) {
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
    if (std::fabs(m[pivot][col]) < 1e-300) return false;
    std::swap(m[col], m[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  for (int i = 0; i < 4; ++i) rhs[i] /= m[i][i];
  return true;
}

struct MomentEstimate {
  double amplitude = 0.0;
  double center_fs = 0.0;
  double sigma_fs = 0.0;
  double background = 0.0;
};

// Initial guess from tail background and windowed moments. Sparse fine
// histograms (well under one count per bin) are rebinned first so the peak
// location is not hijacked by single-bin Poisson spikes; the estimates are
// then mapped back to the original binning.
inline MomentEstimate window_moments(const Histogram& h) {
  const std::size_t n = h.counts.size();

  std::size_t rebin = 1;
  {
    std::uint64_t max_count = *std::max_element(h.counts.begin(), h.counts.end());
    while (max_count < 25 && rebin * 64 < n) {
      rebin *= 2;
      max_count = 0;
      std::uint64_t acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += h.counts[i];
        if ((i + 1) % rebin == 0 || i + 1 == n) {
          max_count = std::max(max_count, acc);
          acc = 0;
        }
      }
    }
  }
  const std::size_t nr = (n + rebin - 1) / rebin;
  std::vector<double> c(nr, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    c[i / rebin] += static_cast<double>(h.counts[i]);
  const double bin_r = static_cast<double>(h.bin_fs) * static_cast<double>(rebin);
  const auto center_of = [&](double i) {
    return static_cast<double>(h.lo_fs) + (i + 0.5) * bin_r;
  };

  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
  const std::size_t tail = std::max<std::size_t>(1, nr / 8);
  double bg = 0.0;
  for (std::size_t i = 0; i < tail; ++i) bg += c[i];
  for (std::size_t i = nr - tail; i < nr; ++i) bg += c[i];
  bg /= static_cast<double>(2 * tail);

  const double amp_r = std::max(c[peak] - bg, 1.0);
  const double half = bg + amp_r / 2.0;
  std::size_t left = peak, right = peak;
  while (left > 0 && c[left] > half) --left;
  while (right + 1 < nr && c[right] > half) ++right;
  const double fwhm_bins = std::max(1.0, static_cast<double>(right - left));

  const auto lo_i = static_cast<std::size_t>(
      std::max<double>(0.0, static_cast<double>(peak) - 2.0 * fwhm_bins));
  const auto hi_i =
      std::min<std::size_t>(nr - 1, peak + static_cast<std::size_t>(2.0 * fwhm_bins) + 1);
  double wsum = 0.0, xsum = 0.0, xxsum = 0.0;
  for (std::size_t i = lo_i; i <= hi_i; ++i) {
    const double w = std::max(c[i] - bg, 0.0);
    wsum += w;
    xsum += w * center_of(static_cast<double>(i));
  }
  const double center = wsum > 0.0 ? xsum / wsum : center_of(static_cast<double>(peak));
  for (std::size_t i = lo_i; i <= hi_i; ++i) {
    const double w = std::max(c[i] - bg, 0.0);
    const double d = center_of(static_cast<double>(i)) - center;
    xxsum += w * d * d;
  }

  MomentEstimate est;
  est.center_fs = center;
  est.background = bg / static_cast<double>(rebin);
  const double sigma_halfmax = fwhm_bins * bin_r / kFwhmPerSigma;
  const double sigma_moment = wsum > 0.0 ? std::sqrt(xxsum / wsum) : 0.0;
  est.sigma_fs = std::max({sigma_moment, sigma_halfmax * 0.5,
                           static_cast<double>(h.bin_fs) / kFwhmPerSigma});
  est.amplitude = std::max(amp_r / static_cast<double>(rebin), 0.5);
  return est;
}

}  // namespace detail

// Fine coincidence histogram of (t_b - t_a). The coarse pass must find a
// bin exceeding the flat-background level by five Poisson sigmas (and by
// the expected extreme of that many background bins); ties are broken by
// the largest +-2-bin neighbourhood sum.
inline Histogram correlate(const std::vector<TimeFs>& a, const std::vector<TimeFs>& b,
                           const HistogramSpec& spec) {
  spec.validate();
  if (a.empty() || b.empty())
    throw std::invalid_argument("correlate: empty tag list");

  const TimeFs span = s_to_fs(spec.search_span_s);
  const TimeFs coarse = std::max<TimeFs>(1, s_to_fs(spec.coarse_bin_s));
  const auto n_coarse = static_cast<std::size_t>((2 * span + coarse - 1) / coarse);

  Histogram coarse_hist;
  coarse_hist.counts.assign(n_coarse, 0);
  detail::sweep_histogram(a, b, -span, coarse, coarse_hist);

  const double mean =
      static_cast<double>(coarse_hist.total()) / static_cast<double>(n_coarse);
  std::uint64_t best = 0;
  std::size_t best_i = 0;
  std::uint64_t best_neighbourhood = 0;
  for (std::size_t i = 0; i < n_coarse; ++i) {
    const std::uint64_t c = coarse_hist.counts[i];
    if (c == 0 || c < best) continue;
    std::uint64_t nb = 0;
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(i + 2, n_coarse - 1);
    for (std::size_t j = lo; j <= hi; ++j) nb += coarse_hist.counts[j];
    if (c > best || nb > best_neighbourhood) {
      best = c;
      best_i = i;
      best_neighbourhood = nb;
    }
  }
  double threshold = mean + 5.0 * std::sqrt(mean);
  // With enough accidental pairs, the flat-background extreme over millions
  // of bins exceeds the naive 5 sigma band; require the peak to clear it.
  // Histograms with almost no counts at all keep the plain rule, so a lone
  // pair still registers as its own peak.
  if (coarse_hist.total() > 25)
    threshold = std::max(threshold, detail::poisson_multiplicity_bound(mean, n_coarse));
  if (static_cast<double>(best) <= threshold)
    throw NoPeakError("correlate: no coarse bin exceeds background by 5 sigma (max " +
                      std::to_string(best) + ", threshold " + std::to_string(threshold) + ")");

  const auto peak_center =
      static_cast<TimeFs>(std::llround(coarse_hist.bin_center_fs(best_i)));
  const TimeFs fine_bin = std::max<TimeFs>(1, s_to_fs(spec.fine_bin_s));
  const TimeFs window = s_to_fs(spec.fine_window_s);
  const auto n_fine = static_cast<std::size_t>((2 * window + fine_bin - 1) / fine_bin);

  Histogram fine;
  fine.counts.assign(n_fine, 0);
  detail::sweep_histogram(a, b, peak_center - window, fine_bin, fine);
  return fine;
}

// Least-squares Gaussian-plus-constant fit (Levenberg-Marquardt, moment
// initial guess, relative tolerance 1e-6, bounded iterations). Throws
// FitError carrying the moment estimate when the iteration fails.
inline CoincidenceFit fit_peak(const Histogram& hist, int max_iterations = 100) {
  const std::size_t n = hist.counts.size();
  if (n < 8) throw std::invalid_argument("fit_peak: histogram too small");
  if (hist.total() == 0) throw std::invalid_argument("fit_peak: histogram is empty");

  const detail::MomentEstimate est = detail::window_moments(hist);
  CoincidenceFit fallback;
  fallback.center_s = fs_to_s(est.center_fs);
  fallback.fwhm_s = fs_to_s(est.sigma_fs * kFwhmPerSigma);
  fallback.amplitude = est.amplitude;
  fallback.background_level = est.background;

  // Shift the abscissa to the initial center estimate for conditioning.
  const double x0 = est.center_fs;
  double amp = est.amplitude;
  double center = 0.0;
  double sigma = est.sigma_fs;
  double bg = est.background;

  double lambda = 1e-3;
  double prev_ss = std::numeric_limits<double>::max();
  bool converged = false;
  for (int iter = 0; iter < max_iterations && !converged; ++iter) {
    std::array<std::array<double, 4>, 4> jtj{};
    std::array<double, 4> jtr{};
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = hist.bin_center_fs(i) - x0;
      const double z = (x - center) / sigma;
      const double e = std::exp(-0.5 * z * z);
      const double model = bg + amp * e;
      const double r = static_cast<double>(hist.counts[i]) - model;
      ss += r * r;
      const std::array<double, 4> g = {e, amp * e * z / sigma, amp * e * z * z / sigma, 1.0};
      for (int p = 0; p < 4; ++p) {
        jtr[p] += g[p] * r;
        for (int q = p; q < 4; ++q) jtj[p][q] += g[p] * g[q];
      }
    }
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < p; ++q) jtj[p][q] = jtj[q][p];

    std::array<std::array<double, 4>, 4> damped = jtj;
    for (int p = 0; p < 4; ++p) damped[p][p] *= 1.0 + lambda;
    std::array<double, 4> step = jtr;
    if (!detail::solve4(damped, step)) {
      lambda *= 10.0;
      if (lambda > 1e12) break;
      continue;
    }

    const double new_amp = amp + step[0];
    const double new_center = center + step[1];
    const double new_sigma = sigma + step[2];
    const double new_bg = bg + step[3];
    if (!(new_amp > 0.0) || !(std::fabs(new_sigma) > 1e-9)) {
      lambda *= 10.0;
      continue;
    }

    // Evaluate the candidate before accepting (standard LM step control).
    double new_ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = hist.bin_center_fs(i) - x0;
      const double z = (x - new_center) / new_sigma;
      new_ss += [&] {
        const double r = static_cast<double>(hist.counts[i]) - (new_bg + new_amp * std::exp(-0.5 * z * z));
        return r * r;
      }();
    }
    if (new_ss <= ss) {
      const double scale = std::max(std::fabs(sigma), static_cast<double>(hist.bin_fs));
      const double rel = std::max({std::fabs(step[0]) / std::max(std::fabs(amp), 1e-12),
                                   std::fabs(step[1]) / scale, std::fabs(step[2]) / scale,
                                   std::fabs(step[3]) / std::max(std::fabs(bg) + 1.0, 1.0)});
      amp = new_amp;
      center = new_center;
      sigma = std::fabs(new_sigma);
      bg = new_bg;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (rel < 1e-6 || std::fabs(prev_ss - new_ss) <= 1e-12 * new_ss) converged = true;
      prev_ss = new_ss;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }

  if (!converged) throw FitError("fit_peak: no convergence after bounded iterations", fallback);
  // A converged solution whose Gaussian integrates to less than one count
  // is a collapse onto the background, not a peak.
  if (amp * std::sqrt(2.0 * std::numbers::pi) * sigma < static_cast<double>(hist.bin_fs))
    throw FitError("fit_peak: amplitude degenerated to below one event", fallback);

  CoincidenceFit fit;
  fit.center_s = fs_to_s(x0 + center);
  fit.fwhm_s = fs_to_s(sigma * kFwhmPerSigma);
  fit.amplitude = amp;
  fit.background_level = bg;

  double integral = 0.0;
  std::size_t bins_in_window = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(hist.bin_center_fs(i) - (x0 + center)) <= 3.0 * sigma) {
      integral += static_cast<double>(hist.counts[i]);
      ++bins_in_window;
    }
  }
  integral -= bg * static_cast<double>(bins_in_window);
  fit.n_coincidences = std::max<long long>(0, std::llround(integral));

  fit.center_std_error_s =
      fs_to_s(sigma) / std::sqrt(static_cast<double>(std::max<long long>(1, fit.n_coincidences)));

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (hist.bin_center_fs(i) - x0 - center) / sigma;
    const double r = static_cast<double>(hist.counts[i]) - (bg + amp * std::exp(-0.5 * z * z));
    ss += r * r;
  }
  fit.fit_rms_residual = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

// Block-level entry point: correlate then fit.
inline CoincidenceFit block_offset(const std::vector<TimeFs>& a, const std::vector<TimeFs>& b,
                                   const HistogramSpec& spec) {
  return fit_peak(correlate(a, b, spec));
}

}  // namespace qttf
