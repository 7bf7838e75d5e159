#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "qttf/coincidence.hpp"
#include "qttf/presets.hpp"
#include "qttf/simulator.hpp"

using namespace qttf;

namespace {

// Regularized upper incomplete gamma Q(a, x), for chi-square p-values.
// Series for x < a+1, continued fraction otherwise (standard forms).
double igamc(double a, double x) {
  if (x <= 0.0) return 1.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - lg);
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - lg) * h;
}

double poisson_pmf(long long k, double mean) {
  return std::exp(-mean + static_cast<double>(k) * std::log(mean) -
                  std::lgamma(static_cast<double>(k) + 1.0));
}

Scenario tiny_scenario() {
  Scenario sc = preset("paper-20km-dcf");
  sc.clock_a.initial_offset_s = 0.0;
  sc.n_blocks = 1;
  return sc;
}

}  // namespace

TEST_CASE("per-block tag counts are Poisson (chi-square over 300 blocks)") {
  Scenario sc = tiny_scenario();
  sc.source_a.singles_rate_hz = 24.0;  // small mean so the pmf is exact
  sc.source_b.singles_rate_hz = 24.0;
  sc.source_a.heralding_efficiency = 0.3;
  sc.source_b.heralding_efficiency = 0.3;
  sc.block_duration_s = 1.0;
  sc.n_blocks = 300;
  sc.rng_seed = 11;

  const auto streams = simulate(sc);
  const double mean = 24.0;

  std::vector<long long> counts;
  for (const auto& blk : streams[0].blocks) counts.push_back(static_cast<long long>(blk.tags.size()));

  // Buckets with expected >= 5, pooling both tails.
  const long long lo = 15, hi = 33;
  std::vector<double> expected;
  std::vector<long long> observed;
  double p_lo = 0.0;
  for (long long k = 0; k < lo; ++k) p_lo += poisson_pmf(k, mean);
  expected.push_back(p_lo * 300.0);
  observed.push_back(std::count_if(counts.begin(), counts.end(), [&](long long c) { return c < lo; }));
  for (long long k = lo; k <= hi; ++k) {
    expected.push_back(poisson_pmf(k, mean) * 300.0);
    observed.push_back(std::count_if(counts.begin(), counts.end(), [&](long long c) { return c == k; }));
  }
  double p_hi = 1.0;
  for (long long k = 0; k <= hi; ++k) p_hi -= poisson_pmf(k, mean);
  expected.push_back(p_hi * 300.0);
  observed.push_back(std::count_if(counts.begin(), counts.end(), [&](long long c) { return c > hi; }));

  double chi2 = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double d = static_cast<double>(observed[i]) - expected[i];
    chi2 += d * d / expected[i];
  }
  const double dof = static_cast<double>(expected.size()) - 1.0;
  const double p_value = igamc(dof / 2.0, chi2 / 2.0);
  CHECK(p_value > 0.001);
}

TEST_CASE("with all randomness off, pair differences equal the link delay exactly") {
  Scenario sc = tiny_scenario();
  sc.source_a.dl_product_s = 1e-30;  // point-source spread
  sc.source_a.heralding_efficiency = 1.0;
  sc.source_b = sc.source_a;
  sc.link.transmission.k2_s2_per_m = 0.0;
  sc.link.compensation.k2_s2_per_m = 0.0;
  sc.jitter.detector_fwhm_s = 0.0;
  sc.jitter.timer_fwhm_s = 0.0;
  sc.rng_seed = 5;

  const auto streams = simulate(sc);
  const auto& idler = streams[0].blocks[0].tags;
  const auto& signal = streams[1].blocks[0].tags;
  // Signal photons emitted within the last ~98 us of the final block fall
  // past its end and are dropped, so the idler channel keeps a few extras;
  // sorted order pairs the survivors front-aligned.
  REQUIRE(idler.size() >= signal.size());
  REQUIRE(!signal.empty());

  const double delay_s = sc.link.transmission.group_delay_s() - sc.link.compensation.group_delay_s();
  const TimeFs res = s_to_fs(sc.timer_resolution_s);
  const TimeFs expected =
      static_cast<TimeFs>(std::llround(delay_s * kFsPerSecond / static_cast<double>(res))) * res;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    REQUIRE(signal[i] - idler[i] == expected);
  }
}

TEST_CASE("per-pair difference std matches sqrt(sigma^2 + jitter^2) to 1% over 1e6 pairs") {
  Scenario sc = tiny_scenario();
  sc.source_a.singles_rate_hz = 200000.0;
  sc.source_a.heralding_efficiency = 1.0;
  sc.source_b = sc.source_a;
  sc.rng_seed = 21;

  const auto streams = simulate(sc);
  const auto& idler = streams[0].blocks[0].tags;
  const auto& signal = streams[1].blocks[0].tags;
  REQUIRE(idler.size() >= signal.size());
  REQUIRE(signal.size() > 900000);

  // eta = 1 and no background: sorted order preserves pairing (spreads are
  // far smaller than the mean gap between emissions); the idler tail whose
  // partners fell past the block end is ignored.
  std::vector<double> diffs;
  diffs.reserve(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i)
    diffs.push_back(static_cast<double>(signal[i] - idler[i]));
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(diffs.size());
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  var /= static_cast<double>(diffs.size() - 1);
  const double std_fs = std::sqrt(var);

  const double sigma = coincidence_sigma(sc.source_a, sc.link);
  const double jit = sc.jitter.combined_std_s();
  const double expected_fs = std::hypot(sigma, jit) * kFsPerSecond;
  CHECK(std_fs == Catch::Approx(expected_fs).epsilon(0.01));
}

TEST_CASE("coincidence peak centers carry the clock offset with the right signs") {
  Scenario sc = preset("paper-20km-dcf");
  sc.n_blocks = 10;
  sc.rng_seed = 33;
  const double t0 = sc.clock_a.initial_offset_s - sc.clock_b.initial_offset_s;
  const double path = sc.link.transmission.group_delay_s() - sc.link.compensation.group_delay_s();

  const auto streams = simulate(sc);
  const HistogramSpec spec = default_histogram_spec(sc);
  double c21 = 0.0, c43 = 0.0, se = 0.0;
  for (long long k = 0; k < sc.n_blocks; ++k) {
    const auto f21 = block_offset(streams[0].blocks[k].tags, streams[1].blocks[k].tags, spec);
    const auto f43 = block_offset(streams[2].blocks[k].tags, streams[3].blocks[k].tags, spec);
    c21 += f21.center_s;
    c43 += f43.center_s;
    se += f21.center_std_error_s;
  }
  c21 /= 10.0;
  c43 /= 10.0;
  se /= 10.0 * std::sqrt(10.0);
  CHECK(c21 == Catch::Approx(path - t0).margin(3.0 * se));
  CHECK(c43 == Catch::Approx(path + t0).margin(3.0 * se));
}

TEST_CASE("removing the DCF widens the fitted FWHM by the predicted ratio") {
  Scenario with_dcf = preset("paper-20km-dcf");
  with_dcf.n_blocks = 25;
  Scenario without = preset("paper-20km-nodcf");
  without.n_blocks = 25;

  const auto measure = [](const Scenario& sc) {
    const auto streams = simulate(sc);
    const HistogramSpec spec = default_histogram_spec(sc);
    double fwhm = 0.0;
    for (long long k = 0; k < sc.n_blocks; ++k) {
      fwhm += block_offset(streams[0].blocks[k].tags, streams[1].blocks[k].tags, spec).fwhm_s;
      fwhm += block_offset(streams[2].blocks[k].tags, streams[3].blocks[k].tags, spec).fwhm_s;
    }
    return fwhm / (2.0 * static_cast<double>(sc.n_blocks));
  };

  const double measured_ratio = measure(without) / measure(with_dcf);
  const double predicted_ratio =
      observed_fwhm(coincidence_sigma(without.source_a, without.link), without.jitter) /
      observed_fwhm(coincidence_sigma(with_dcf.source_a, with_dcf.link), with_dcf.jitter);
  CHECK(measured_ratio == Catch::Approx(predicted_ratio).epsilon(0.05));
}

TEST_CASE("background tags are uncorrelated with the pairs") {
  Scenario sc = preset("paper-floor-15m");
  sc.n_blocks = 1;
  sc.background_rate_hz = 2000.0;
  sc.rng_seed = 77;
  const auto streams = simulate(sc);
  const HistogramSpec spec = default_histogram_spec(sc);
  const Histogram h = correlate(streams[0].blocks[0].tags, streams[1].blocks[0].tags, spec);
  const CoincidenceFit fit = fit_peak(h);

  // Mean count in fine bins far from the peak matches the accidental rate:
  // n_a * n_b * bin / duration, flat.
  const double n_a = static_cast<double>(streams[0].blocks[0].tags.size());
  const double n_b = static_cast<double>(streams[1].blocks[0].tags.size());
  const double expected_bg = n_a * n_b * spec.fine_bin_s / sc.block_duration_s;
  double off_peak = 0.0;
  std::size_t off_bins = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (std::fabs(h.bin_center_fs(i) - fit.center_s * kFsPerSecond) > 10.0 * fit.fwhm_s * kFsPerSecond) {
      off_peak += static_cast<double>(h.counts[i]);
      ++off_bins;
    }
  }
  off_peak /= static_cast<double>(off_bins);
  const double se = std::sqrt(expected_bg / static_cast<double>(off_bins));
  CHECK(off_peak == Catch::Approx(expected_bg).margin(5.0 * se));
}

TEST_CASE("determinism: identical seeds give identical streams") {
  Scenario sc = preset("paper-floor-15m");
  sc.n_blocks = 3;
  const auto s1 = simulate(sc);
  const auto s2 = simulate(sc);
  for (int ch = 0; ch < 4; ++ch) {
    REQUIRE(s1[ch].blocks.size() == s2[ch].blocks.size());
    for (std::size_t b = 0; b < s1[ch].blocks.size(); ++b) {
      REQUIRE(s1[ch].blocks[b].tags == s2[ch].blocks[b].tags);
    }
  }
  Scenario other = sc;
  other.rng_seed = sc.rng_seed + 1;
  const auto s3 = simulate(other);
  CHECK(s1[0].blocks[0].tags != s3[0].blocks[0].tags);
}

TEST_CASE("scenario validation") {
  Scenario sc = tiny_scenario();
  sc.n_blocks = 0;
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);

  sc = tiny_scenario();
  sc.source_a.singles_rate_hz = 1e9;  // > 1e8 tags per block
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);

  sc = tiny_scenario();
  sc.clock_a.initial_offset_s = 3.0;  // comparable to the block duration
  CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("tags are sorted and within their block") {
  Scenario sc = preset("paper-20km-dcf");
  sc.n_blocks = 2;
  const auto streams = simulate(sc);
  const TimeFs block_fs = s_to_fs(sc.block_duration_s);
  for (const auto& stream : streams) {
    for (const auto& blk : stream.blocks) {
      CHECK(std::is_sorted(blk.tags.begin(), blk.tags.end()));
      if (!blk.tags.empty()) {
        CHECK(blk.tags.front() >= 0);
        CHECK(blk.tags.back() < block_fs);
      }
    }
  }
}

TEST_CASE("sinc-sampled spectrum reproduces the Gaussian-approximation width") {
  Scenario sc = preset("paper-20km-nodcf");  // dispersion-dominated
  sc.n_blocks = 12;
  sc.sinc_jsa = true;
  sc.rng_seed = 99;
  const auto streams = simulate(sc);
  const HistogramSpec spec = default_histogram_spec(sc);
  double fwhm = 0.0;
  for (long long k = 0; k < sc.n_blocks; ++k)
    fwhm += block_offset(streams[0].blocks[k].tags, streams[1].blocks[k].tags, spec).fwhm_s;
  fwhm /= static_cast<double>(sc.n_blocks);
  const double predicted =
      observed_fwhm(coincidence_sigma(sc.source_a, sc.link), sc.jitter);
  CHECK(fwhm == Catch::Approx(predicted).epsilon(0.10));
}
