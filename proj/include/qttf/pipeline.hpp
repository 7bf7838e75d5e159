// Block-streamed orchestration: feed per-block tag vectors through the
// per-direction coincidence fits, the two-way combination and the
// stability statistics. Works identically off the simulator or off tag
// files, one block in memory at a time.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qttf/coincidence.hpp"
#include "qttf/simulator.hpp"
#include "qttf/tagio.hpp"
#include "qttf/twoway.hpp"

namespace qttf {

struct BlockTags {
  std::uint64_t epoch_s = 0;
  std::array<std::vector<TimeFs>, 4> channels;
};

using BlockSource = std::function<std::optional<BlockTags>()>;

struct SkippedBlock {
  std::uint64_t epoch_s = 0;
  std::string direction;
  std::string reason;
};

struct AnalysisResult {
  OffsetSeries series;
  StabilityCurve stability;       // of t0
  StabilityCurve stability_t21;   // one-way, for common-mode comparisons
  SeriesSummary summary;          // of t0
  SeriesSummary summary_t21;
  SeriesSummary summary_t43;
  double mean_fwhm_ab_s = 0.0;
  double mean_fwhm_ba_s = 0.0;
  double mean_n_ab = 0.0;
  double mean_n_ba = 0.0;
  long long blocks_total = 0;
  long long blocks_skipped = 0;
  bool degraded = false;          // more than 10% of blocks skipped
  std::vector<SkippedBlock> skipped;
  Histogram first_hist_ab;        // for CSV export / inspection
  Histogram first_hist_ba;
};

inline BlockSource simulator_source(BlockSimulator& sim) {
  const auto block_s =
      static_cast<std::uint64_t>(std::llround(sim.scenario().block_duration_s));
  return [&sim, block_s, k = 0LL]() mutable -> std::optional<BlockTags> {
    if (k >= sim.n_blocks()) return std::nullopt;
    BlockTags out;
    out.epoch_s = static_cast<std::uint64_t>(k) * block_s;
    out.channels = sim.next_block();
    ++k;
    return out;
  };
}

inline BlockSource stream_source(const std::array<TagStream, 4>& streams) {
  return [&streams, k = std::size_t{0}]() mutable -> std::optional<BlockTags> {
    if (k >= streams[0].blocks.size()) return std::nullopt;
    BlockTags out;
    out.epoch_s = streams[0].blocks[k].epoch_s;
    for (std::size_t ch = 0; ch < 4; ++ch) {
      if (k >= streams[ch].blocks.size() || streams[ch].blocks[k].epoch_s != out.epoch_s)
        throw AlignmentError("analyze: channel files disagree on block epochs at block " +
                             std::to_string(k));
      out.channels[ch] = streams[ch].blocks[k].tags;
    }
    ++k;
    return out;
  };
}

inline AnalysisResult analyze_blocks(BlockSource next, const HistogramSpec& spec,
                                     double block_duration_s,
                                     TdevEstimator estimator = TdevEstimator::overlapping) {
  AnalysisResult res;
  std::vector<DirectionalFit> ab, ba;
  bool kept_first = false;

  while (auto block = next()) {
    ++res.blocks_total;
    bool ok = true;
    Histogram hist_ab, hist_ba;
    CoincidenceFit fit_ab, fit_ba;
    try {
      hist_ab = correlate(block->channels[0], block->channels[1], spec);
      fit_ab = fit_peak(hist_ab);
    } catch (const std::exception& e) {
      res.skipped.push_back({block->epoch_s, "a->b", e.what()});
      ok = false;
    }
    try {
      hist_ba = correlate(block->channels[2], block->channels[3], spec);
      fit_ba = fit_peak(hist_ba);
    } catch (const std::exception& e) {
      res.skipped.push_back({block->epoch_s, "b->a", e.what()});
      ok = false;
    }
    if (!ok) {
      ++res.blocks_skipped;
      continue;
    }
    if (!kept_first) {
      res.first_hist_ab = std::move(hist_ab);
      res.first_hist_ba = std::move(hist_ba);
      kept_first = true;
    }
    ab.push_back({block->epoch_s, fit_ab});
    ba.push_back({block->epoch_s, fit_ba});
    res.mean_fwhm_ab_s += fit_ab.fwhm_s;
    res.mean_fwhm_ba_s += fit_ba.fwhm_s;
    res.mean_n_ab += static_cast<double>(fit_ab.n_coincidences);
    res.mean_n_ba += static_cast<double>(fit_ba.n_coincidences);
  }

  if (ab.empty()) throw AlignmentError("analyze: every block was skipped");
  const auto n = static_cast<double>(ab.size());
  res.mean_fwhm_ab_s /= n;
  res.mean_fwhm_ba_s /= n;
  res.mean_n_ab /= n;
  res.mean_n_ba /= n;

  res.series = combine(ab, ba, block_duration_s);
  res.stability = tdev(res.series, estimator);
  res.summary = summarize(res.series);

  std::vector<std::uint64_t> epochs;
  std::vector<double> t21, t43;
  for (const auto& r : res.series.records) {
    epochs.push_back(r.epoch_s);
    t21.push_back(r.t21_s);
    t43.push_back(r.t43_s);
  }
  res.summary_t21 = summarize(epochs, t21);
  res.summary_t43 = summarize(epochs, t43);
  res.stability_t21 = tdev(t21, block_duration_s, octave_factors(t21.size()), estimator);

  res.degraded = res.blocks_skipped * 10 > res.blocks_total;
  return res;
}

// Simulate-and-analyze in one streamed pass.
inline AnalysisResult run_scenario(const Scenario& scenario, const HistogramSpec& spec,
                                   TdevEstimator estimator = TdevEstimator::overlapping) {
  BlockSimulator sim(scenario);
  return analyze_blocks(simulator_source(sim), spec, scenario.block_duration_s, estimator);
}

// Simulate straight to QTTF files without materializing the run.
inline std::vector<std::filesystem::path> simulate_to_files(const Scenario& scenario,
                                                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  BlockSimulator sim(scenario);
  std::vector<std::filesystem::path> paths;
  std::array<std::optional<TagFileWriter>, 4> writers;
  for (int ch = 0; ch < 4; ++ch) {
    paths.push_back(dir / channel_filename(static_cast<Channel>(ch)));
    writers[static_cast<std::size_t>(ch)].emplace(paths.back(), static_cast<Channel>(ch));
  }
  const auto block_s =
      static_cast<std::uint64_t>(std::llround(scenario.block_duration_s));
  for (long long k = 0; k < scenario.n_blocks; ++k) {
    auto block = sim.next_block();
    for (std::size_t ch = 0; ch < 4; ++ch)
      writers[ch]->write_block(static_cast<std::uint64_t>(k) * block_s, block[ch]);
  }
  for (auto& w : writers) w->close();
  return paths;
}

}  // namespace qttf
