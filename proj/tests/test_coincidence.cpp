#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qttf/coincidence.hpp"
#include "qttf/rng.hpp"

using namespace qttf;

namespace {

// Exhaustive all-pairs histogram, the oracle for the swept implementation.
Histogram brute_force_histogram(const std::vector<TimeFs>& a, const std::vector<TimeFs>& b,
                                TimeFs lo, TimeFs bin, std::size_t nbins) {
  Histogram h;
  h.lo_fs = lo;
  h.bin_fs = bin;
  h.counts.assign(nbins, 0);
  for (const TimeFs ta : a) {
    for (const TimeFs tb : b) {
      const TimeFs d = tb - ta;
      if (d < lo || d >= lo + static_cast<TimeFs>(nbins) * bin) continue;
      ++h.counts[static_cast<std::size_t>((d - lo) / bin)];
    }
  }
  return h;
}

// Random instance with a planted coincidence peak.
struct Instance {
  std::vector<TimeFs> a, b;
};

Instance random_instance(std::uint64_t seed, std::size_t max_tags) {
  Rng rng(seed);
  Instance inst;
  const auto n_pairs = static_cast<std::size_t>(20 + rng.uniform() * 80);
  const auto n_singles = static_cast<std::size_t>(rng.uniform() * (max_tags - 100));
  const TimeFs offset = static_cast<TimeFs>(rng.uniform(-5e11, 5e11));  // within +-0.5 ms
  const double span_fs = 1e14;                                         // 100 us of data
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const auto t = static_cast<TimeFs>(rng.uniform(0.0, span_fs));
    inst.a.push_back(t);
    inst.b.push_back(t + offset + static_cast<TimeFs>(rng.normal(0.0, 4e4)));  // 40 ps spread
  }
  for (std::size_t i = 0; i < n_singles / 2; ++i) {
    inst.a.push_back(static_cast<TimeFs>(rng.uniform(0.0, span_fs)));
    inst.b.push_back(static_cast<TimeFs>(rng.uniform(0.0, span_fs)));
  }
  std::sort(inst.a.begin(), inst.a.end());
  std::sort(inst.b.begin(), inst.b.end());
  return inst;
}

Histogram gaussian_histogram(double amplitude, double center_fs, double sigma_fs,
                             double background, TimeFs bin_fs, double halfspan_fs) {
  Histogram h;
  h.bin_fs = bin_fs;
  h.lo_fs = static_cast<TimeFs>(center_fs - halfspan_fs);
  const auto nbins = static_cast<std::size_t>(2.0 * halfspan_fs / static_cast<double>(bin_fs));
  h.counts.resize(nbins);
  for (std::size_t i = 0; i < nbins; ++i) {
    const double z = (h.bin_center_fs(i) - center_fs) / sigma_fs;
    h.counts[i] =
        static_cast<std::uint64_t>(std::llround(background + amplitude * std::exp(-0.5 * z * z)));
  }
  return h;
}

}  // namespace

TEST_CASE("one pair lands in the bin containing its offset") {
  HistogramSpec spec;
  const std::vector<TimeFs> a = {0};
  const std::vector<TimeFs> b = {100000};  // +100 ps
  const Histogram h = correlate(a, b, spec);
  CHECK(h.total() == 1);
  std::size_t hot = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    if (h.counts[i]) hot = i;
  const double center = h.bin_center_fs(hot);
  CHECK(std::fabs(center - 100000.0) <= static_cast<double>(h.bin_fs));
}

TEST_CASE("empty inputs are rejected") {
  HistogramSpec spec;
  const std::vector<TimeFs> some = {1, 2, 3};
  CHECK_THROWS_AS(correlate({}, some, spec), std::invalid_argument);
  CHECK_THROWS_AS(correlate(some, {}, spec), std::invalid_argument);
}

TEST_CASE("independent streams raise a no-peak error") {
  Rng rng(31337);
  std::vector<TimeFs> a, b;
  for (int i = 0; i < 30000; ++i) {
    a.push_back(static_cast<TimeFs>(rng.uniform(0.0, 5e15)));
    b.push_back(static_cast<TimeFs>(rng.uniform(0.0, 5e15)));
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  HistogramSpec spec;
  CHECK_THROWS_AS(correlate(a, b, spec), NoPeakError);
}

TEST_CASE("swept histogram equals the all-pairs oracle bin for bin") {
  HistogramSpec spec;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Instance inst = random_instance(seed, 500);
    const Histogram fine = correlate(inst.a, inst.b, spec);
    const Histogram oracle =
        brute_force_histogram(inst.a, inst.b, fine.lo_fs, fine.bin_fs, fine.counts.size());
    REQUIRE(fine.counts.size() == oracle.counts.size());
    for (std::size_t i = 0; i < fine.counts.size(); ++i) {
      REQUIRE(fine.counts[i] == oracle.counts[i]);
    }
  }
}

TEST_CASE("noiseless Gaussian histogram is recovered to better than 0.1%") {
  const double amplitude = 100.0, center = 37000.0, sigma = 30000.0;  // +37 ps, 30 ps
  const Histogram h = gaussian_histogram(amplitude, center, sigma, 0.0, 1000, 2e6);
  const CoincidenceFit fit = fit_peak(h);
  CHECK(std::fabs(fit.amplitude - amplitude) / amplitude < 1e-3);
  CHECK(std::fabs(fit.center_s * kFsPerSecond - center) / center < 1e-3);
  CHECK(std::fabs(fit.fwhm_s * kFsPerSecond - sigma * kFwhmPerSigma) / (sigma * kFwhmPerSigma) <
        1e-3);
  CHECK(std::fabs(fit.background_level) < 0.05);
}

TEST_CASE("fit on a flat background reports the floor and its residuals") {
  const Histogram h = gaussian_histogram(80.0, 0.0, 25000.0, 12.0, 1000, 1.5e6);
  const CoincidenceFit fit = fit_peak(h);
  CHECK(fit.background_level == Catch::Approx(12.0).margin(0.2));
  CHECK(fit.amplitude == Catch::Approx(80.0).epsilon(0.01));
  CHECK(fit.fit_rms_residual < 1.0);  // rounding noise only
}

TEST_CASE("empty histogram violates the fit precondition") {
  Histogram h;
  h.lo_fs = 0;
  h.bin_fs = 1000;
  h.counts.assign(512, 0);
  CHECK_THROWS_AS(fit_peak(h), std::invalid_argument);
}

TEST_CASE("exhausted iteration budget raises a fit error carrying the moment fallback") {
  const Histogram h = gaussian_histogram(100.0, 37000.0, 30000.0, 5.0, 1000, 2e6);
  CHECK_THROWS_AS(fit_peak(h, 1), FitError);
  try {
    fit_peak(h, 1);
  } catch (const FitError& e) {
    // The moment estimate is already in the right neighbourhood.
    CHECK(e.fallback.center_s * kFsPerSecond == Catch::Approx(37000.0).margin(5000.0));
    CHECK(e.fallback.fwhm_s > 0.0);
  }
}

TEST_CASE("translation equivariance of the block offset") {
  const Instance inst = random_instance(77, 400);
  HistogramSpec spec;
  const CoincidenceFit base = block_offset(inst.a, inst.b, spec);

  const TimeFs shift = 500000;  // +500 ps
  std::vector<TimeFs> shifted = inst.b;
  for (TimeFs& t : shifted) t += shift;
  const CoincidenceFit moved = block_offset(inst.a, shifted, spec);
  CHECK((moved.center_s - base.center_s) * kFsPerSecond ==
        Catch::Approx(static_cast<double>(shift)).margin(1.0));
}

TEST_CASE("exchange antisymmetry of the block offset") {
  const Instance inst = random_instance(99, 400);
  HistogramSpec spec;
  const CoincidenceFit ab = block_offset(inst.a, inst.b, spec);
  const CoincidenceFit ba = block_offset(inst.b, inst.a, spec);
  CHECK((ab.center_s + ba.center_s) * kFsPerSecond ==
        Catch::Approx(0.0).margin(static_cast<double>(spec.fine_bin_s * kFsPerSecond)));
}

TEST_CASE("histogram spec invariants are enforced") {
  HistogramSpec bad;
  bad.fine_bin_s = 2e-9;  // larger than the coarse bin
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  HistogramSpec neg;
  neg.search_span_s = -1.0;
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}
