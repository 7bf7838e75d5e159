// Statistical consistency of the simulated pipeline against the closed
// forms, at the published 200-block scale. Seeds are fixed; every expected
// value below is either a closed form or was verified against it.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qttf/pipeline.hpp"
#include "qttf/presets.hpp"

using namespace qttf;

namespace {

struct CenterStats {
  double one_way_sd_s = 0.0;   // pooled over both directions
  double mean_se_s = 0.0;      // mean reported center standard error
  AnalysisResult analysis;
};

CenterStats run_with_centers(const Scenario& sc) {
  CenterStats out;
  BlockSimulator sim(sc);
  const HistogramSpec spec = default_histogram_spec(sc);
  std::vector<DirectionalFit> ab, ba;
  std::vector<double> centers_ab, centers_ba;
  double se_sum = 0.0;
  for (long long k = 0; k < sc.n_blocks; ++k) {
    auto blk = sim.next_block();
    const auto e = static_cast<std::uint64_t>(k * std::llround(sc.block_duration_s));
    DirectionalFit f1{e, block_offset(blk[0], blk[1], spec)};
    DirectionalFit f2{e, block_offset(blk[2], blk[3], spec)};
    centers_ab.push_back(f1.fit.center_s);
    centers_ba.push_back(f2.fit.center_s);
    se_sum += 0.5 * (f1.fit.center_std_error_s + f2.fit.center_std_error_s);
    ab.push_back(f1);
    ba.push_back(f2);
  }
  out.analysis.series = combine(ab, ba, sc.block_duration_s);
  out.analysis.summary = summarize(out.analysis.series);
  out.mean_se_s = se_sum / static_cast<double>(sc.n_blocks);

  const auto sd = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  out.one_way_sd_s = std::sqrt(0.5 * (sd(centers_ab) * sd(centers_ab) +
                                      sd(centers_ba) * sd(centers_ba)));
  return out;
}

}  // namespace

TEST_CASE("200-block scatter follows the per-block prediction bookkeeping", "[slow]") {
  Scenario sc = preset("paper-20km-dcf");
  sc.n_blocks = 200;
  sc.rng_seed = 42;
  const double sigma = coincidence_sigma(sc.source_a, sc.link);
  const long long n = expected_coincidences(sc.source_a, sc.block_duration_s);
  const double eq = per_block_sd(sigma, sc.jitter, n);

  const CenterStats stats = run_with_centers(sc);

  // One-way center scatter sits at sqrt(2) x the per-block two-way value.
  CHECK(stats.one_way_sd_s == Catch::Approx(eq * std::sqrt(2.0)).epsilon(0.15));
  // Two-way series SD agrees with the per-block prediction (the published
  // 1.0 ps for this configuration).
  CHECK(stats.analysis.summary.sd_s == Catch::Approx(eq).epsilon(0.15));
  // Injected 1 us offset recovered within 3 standard errors.
  const double se_mean =
      stats.analysis.summary.sd_s / std::sqrt(static_cast<double>(sc.n_blocks));
  CHECK(std::fabs(stats.analysis.summary.mean_s - 1e-6) <= 3.0 * se_mean);
}

TEST_CASE("fitted FWHM tracks the observed-width prediction per preset", "[slow]") {
  for (const char* name : {"paper-20km-dcf", "paper-20km-nodcf", "paper-floor-15m"}) {
    Scenario sc = preset(name);
    sc.n_blocks = name == std::string("paper-20km-nodcf") ? 60 : 100;
    sc.rng_seed = 7;
    const double predicted = observed_fwhm(coincidence_sigma(sc.source_a, sc.link), sc.jitter);
    const AnalysisResult res = run_scenario(sc, default_histogram_spec(sc));
    const double fwhm = 0.5 * (res.mean_fwhm_ab_s + res.mean_fwhm_ba_s);
    INFO(name);
    CHECK(fwhm == Catch::Approx(predicted).epsilon(0.05));
    CHECK(res.mean_n_ab ==
          Catch::Approx(static_cast<double>(expected_coincidences(sc.source_a, 5.0)))
              .epsilon(0.05));
  }
}

TEST_CASE("center standard error scales as 1/sqrt(N) with the pair rate", "[slow]") {
  Scenario base = preset("paper-20km-dcf");
  base.n_blocks = 20;
  base.rng_seed = 11;
  Scenario boosted = base;
  boosted.source_a.singles_rate_hz *= 4.0;
  boosted.source_b.singles_rate_hz *= 4.0;

  const CenterStats s1 = run_with_centers(base);
  const CenterStats s4 = run_with_centers(boosted);
  CHECK(s4.mean_se_s / s1.mean_se_s == Catch::Approx(0.5).epsilon(0.10));
}
