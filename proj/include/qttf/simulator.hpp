// Monte-Carlo generation of the four time-tag streams.
//
// Each site hosts a pair source; the signal photon crosses the transmission
// fiber to the remote detector while the idler stays local behind the
// compensation fiber. Channel map (and the clock each one is stamped by):
//
//   D1  idler  of source A, detected at site A   clock A
//   D2  signal of source A, detected at site B   clock B
//   D3  idler  of source B, detected at site B   clock B
//   D4  signal of source B, detected at site A   clock A
//
// Pair emissions are homogeneous Poisson. The pair's differential timing
// spread (source bandwidth + net dispersion) is sampled as one Gaussian of
// std coincidence_sigma() applied to the signal leg; per-tag detection
// jitter is added per channel; unpaired singles and background tags are
// uncorrelated; every reading is quantized to the timer resolution. Blocks
// are generated from independent sub-seeded streams, so a run is fully
// deterministic and block generation could proceed in parallel.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qttf/clock.hpp"
#include "qttf/physics.hpp"
#include "qttf/rng.hpp"
#include "qttf/units.hpp"

namespace qttf {

enum class Channel : std::uint8_t { d1 = 0, d2 = 1, d3 = 2, d4 = 3 };

struct TagBlock {
  std::uint64_t epoch_s = 0;
  std::vector<TimeFs> tags;  // femtoseconds within the block, sorted
};

struct TagStream {
  Channel channel = Channel::d1;
  std::vector<TagBlock> blocks;
};

struct Scenario {
  SourceSpec source_a;
  SourceSpec source_b;
  LinkConfig link;
  JitterSpec jitter;
  ClockModel clock_a;
  ClockModel clock_b;
  DriftTopology topology;
  double block_duration_s = 5.0;
  long long n_blocks = 1;
  double background_rate_hz = 0.0;
  double timer_resolution_s = 1e-12;
  std::uint64_t rng_seed = 1;
  // Sample the pair spectrum from the true sinc^2 JSA instead of the
  // Gaussian approximation (sensitivity studies; predictions stay Gaussian).
  bool sinc_jsa = false;
  // Extra inverse group velocity on the B->A transmission leg only; breaks
  // the two-way symmetry on purpose for delay-attack-style experiments.
  double k1_asymmetry_s_per_m = 0.0;

  void validate() const {
    source_a.validate();
    source_b.validate();
    link.validate();
    jitter.validate();
    if (n_blocks < 1) throw std::invalid_argument("scenario: n_blocks must be >= 1");
    if (!(block_duration_s > 0.0))
      throw std::invalid_argument("scenario: block_duration must be > 0");
    // Block epochs are integer seconds in the tag format.
    if (block_duration_s != std::floor(block_duration_s))
      throw std::invalid_argument("scenario: block_duration must be a whole number of seconds");
    if (background_rate_hz < 0.0)
      throw std::invalid_argument("scenario: background_rate must be >= 0");
    if (!(timer_resolution_s > 0.0))
      throw std::invalid_argument("scenario: timer_resolution must be > 0");
    const double max_rate =
        std::max(source_a.singles_rate_hz, source_b.singles_rate_hz) + background_rate_hz;
    if (max_rate * block_duration_s > 1e8)
      throw std::invalid_argument(
          "scenario: more than 1e8 tags per block; shrink block_duration or rates");
    const double max_shift = link.transmission.group_delay_s() +
                             link.compensation.group_delay_s() +
                             std::fabs(clock_a.initial_offset_s) +
                             std::fabs(clock_b.initial_offset_s);
    if (max_shift > 0.45 * block_duration_s)
      throw std::invalid_argument(
          "scenario: path delays plus clock offsets approach the block duration");
  }

  double duration_s() const { return block_duration_s * static_cast<double>(n_blocks); }
};

namespace detail {

// Draws detuning Omega from the sinc^2 joint spectral amplitude,
// p(u) ~ sinc^2(u) with u = DL*Omega/2, by rejection under min(1, 1/u^2).
inline double sample_sinc_detuning(Rng& rng, double dl_product_s) {
  for (;;) {
    double u;
    if (rng.uniform() < 0.5) {
      u = rng.uniform(-1.0, 1.0);
    } else {
      const double v = rng.uniform();
      if (v == 0.0) continue;
      u = 1.0 / v;
      if (rng.uniform() < 0.5) u = -u;
    }
    const double envelope = std::min(1.0, 1.0 / (u * u));
    const double s = (u == 0.0) ? 1.0 : std::sin(u) / u;
    if (rng.uniform() * envelope <= s * s) return 2.0 * u / dl_product_s;
  }
}

}  // namespace detail

// Generates finalized blocks in order. Tags whose reading falls outside
// their emission block (path delay or clock offset pushes them across an
// epoch boundary) migrate to the neighbouring block, which is why
// finalization lags emission by one block.
class BlockSimulator {
 public:
  explicit BlockSimulator(const Scenario& scenario)
      : sc_(scenario),
        res_fs_(std::max<TimeFs>(1, s_to_fs(scenario.timer_resolution_s))),
        block_fs_(s_to_fs(scenario.block_duration_s)) {
    sc_.validate();
    const double duration = sc_.duration_s();
    topology_ = RealizedTopology(sc_.topology, duration, sc_.block_duration_s,
                                 derive_seed(sc_.rng_seed, 0xD21Fu));
    clock_a_ = RealizedClock(sc_.clock_a, duration, sc_.block_duration_s,
                             derive_seed(sc_.rng_seed, 0xC10Cu, 0u));
    clock_b_ = RealizedClock(sc_.clock_b, duration, sc_.block_duration_s,
                             derive_seed(sc_.rng_seed, 0xC10Cu, 1u));
    pending_.emplace_back();  // block 0
  }

  long long n_blocks() const { return sc_.n_blocks; }
  const Scenario& scenario() const { return sc_; }

  // Tags of block `current`, all four channels, sorted and quantized.
  std::array<std::vector<TimeFs>, 4> next_block() {
    if (current_ >= sc_.n_blocks) throw std::out_of_range("simulator: past last block");
    while (emitted_ < sc_.n_blocks && emitted_ <= current_ + 1) emit_block(emitted_++);
    std::array<std::vector<TimeFs>, 4> out = std::move(pending_.front());
    pending_.pop_front();
    ++current_;
    for (auto& tags : out) std::sort(tags.begin(), tags.end());
    return out;
  }

 private:
  // Emission block k: draws all events whose emission time lies in block k
  // and routes each finalized reading to its target block.
  void emit_block(long long k) {
    while (pending_.size() < 3) pending_.emplace_back();

    emit_source(k, /*source_a=*/true);
    emit_source(k, /*source_a=*/false);

    if (sc_.background_rate_hz > 0.0) {
      for (int ch = 0; ch < 4; ++ch) {
        Rng rng(derive_seed(sc_.rng_seed, 0xB6u, static_cast<std::uint64_t>(k),
                            static_cast<std::uint64_t>(ch)));
        const auto n = rng.poisson(sc_.background_rate_hz * sc_.block_duration_s);
        for (long long i = 0; i < n; ++i) {
          // Dark counts are uniform in the local timescale already.
          push_tag(k, ch, static_cast<TimeFs>(rng.uniform() * static_cast<double>(block_fs_)));
        }
      }
    }
  }

  // Readings are assembled in integer femtoseconds: the emission position
  // and the static leg delays are exact integers, only the small stochastic
  // terms (ps scale) pass through one rounding each. Keeps the arithmetic
  // exact over arbitrarily long runs.
  void emit_source(long long k, bool source_a) {
    const SourceSpec& src = source_a ? sc_.source_a : sc_.source_b;
    const Site local_site = source_a ? Site::a : Site::b;
    const Site remote_site = source_a ? Site::b : Site::a;
    const Direction dir = source_a ? Direction::a_to_b : Direction::b_to_a;
    const int idler_ch = source_a ? 0 : 2;   // D1 / D3
    const int signal_ch = source_a ? 1 : 3;  // D2 / D4

    Rng rng(derive_seed(sc_.rng_seed, 0x51u, static_cast<std::uint64_t>(k),
                        static_cast<std::uint64_t>(source_a ? 0 : 1)));

    const double mean_singles = src.singles_rate_hz * sc_.block_duration_s;
    const long long n_pairs = rng.poisson(mean_singles * src.heralding_efficiency);
    const long long n_idler_only = rng.poisson(mean_singles * (1.0 - src.heralding_efficiency));
    const long long n_signal_only = rng.poisson(mean_singles * (1.0 - src.heralding_efficiency));

    const double sigma = coincidence_sigma(src, sc_.link);
    const double tag_jitter = sc_.jitter.per_channel_std_s();
    const double k1_extra = (dir == Direction::b_to_a)
                                ? sc_.k1_asymmetry_s_per_m * sc_.link.transmission.length_m
                                : 0.0;
    const TimeFs trans_fs =
        s_to_fs(sc_.link.transmission.group_delay_s() + k1_extra);
    const TimeFs comp_fs = s_to_fs(sc_.link.compensation.group_delay_s());
    const double epoch = static_cast<double>(k) * sc_.block_duration_s;

    const auto draw_emission = [&] {
      return static_cast<TimeFs>(rng.uniform() * static_cast<double>(block_fs_));
    };
    const auto idler_extra = [&](double t_abs) {
      return topology_.compensation_drift(local_site, t_abs) + tag_jitter * rng.normal() +
             clock_offset(local_site, t_abs);
    };
    const auto signal_extra = [&](double t_abs) {
      return topology_.transmission_drift(t_abs) + tag_jitter * rng.normal() +
             clock_offset(remote_site, t_abs);
    };

    for (long long i = 0; i < n_pairs; ++i) {
      const TimeFs u = draw_emission();
      const double t_abs = epoch + fs_to_s(u);
      const double spread = sc_.sinc_jsa ? sinc_spread(rng, src) : sigma * rng.normal();
      push_tag(k, idler_ch, u + comp_fs + s_to_fs(idler_extra(t_abs)));
      push_tag(k, signal_ch, u + trans_fs + s_to_fs(spread + signal_extra(t_abs)));
    }
    for (long long i = 0; i < n_idler_only; ++i) {
      const TimeFs u = draw_emission();
      push_tag(k, idler_ch, u + comp_fs + s_to_fs(idler_extra(epoch + fs_to_s(u))));
    }
    for (long long i = 0; i < n_signal_only; ++i) {
      const TimeFs u = draw_emission();
      push_tag(k, signal_ch, u + trans_fs + s_to_fs(signal_extra(epoch + fs_to_s(u))));
    }
  }

  double sinc_spread(Rng& rng, const SourceSpec& src) {
    const double omega = detail::sample_sinc_detuning(rng, src.dl_product_s);
    const double walkoff = rng.uniform(-0.5, 0.5) * src.dl_product_s;
    return walkoff + sc_.link.net_dispersion_s2() * omega;
  }

  double clock_offset(Site site, double t_abs) const {
    return site == Site::a ? clock_a_.offset_at(t_abs) : clock_b_.offset_at(t_abs);
  }

  // Quantizes a block-local reading and files it under the block that
  // contains it. Readings before the first or past the last block are
  // outside the recorded run and dropped.
  void push_tag(long long k, int channel, TimeFs reading_fs) {
    const TimeFs half = res_fs_ / 2;
    TimeFs q = ((reading_fs >= 0 ? reading_fs + half : reading_fs - half) / res_fs_) * res_fs_;
    long long shift = 0;
    while (q < 0) {
      q += block_fs_;
      --shift;
    }
    while (q >= block_fs_) {
      q -= block_fs_;
      ++shift;
    }
    const long long target = k + shift;
    if (target < current_ || target >= sc_.n_blocks) return;
    const auto slot = static_cast<std::size_t>(target - current_);
    if (slot >= pending_.size()) return;  // beyond the one-block lag window
    pending_[slot][static_cast<std::size_t>(channel)].push_back(q);
  }

  Scenario sc_;
  TimeFs res_fs_;
  TimeFs block_fs_;
  RealizedTopology topology_;
  RealizedClock clock_a_;
  RealizedClock clock_b_;
  std::deque<std::array<std::vector<TimeFs>, 4>> pending_;
  long long emitted_ = 0;
  long long current_ = 0;
};

// Materializes the whole run. Prefer BlockSimulator for long runs; four
// channels at paper rates cost ~1 MB per block.
inline std::array<TagStream, 4> simulate(const Scenario& scenario) {
  BlockSimulator sim(scenario);
  std::array<TagStream, 4> streams;
  for (int ch = 0; ch < 4; ++ch) {
    streams[static_cast<std::size_t>(ch)].channel = static_cast<Channel>(ch);
    streams[static_cast<std::size_t>(ch)].blocks.reserve(
        static_cast<std::size_t>(scenario.n_blocks));
  }
  const auto block_s = static_cast<std::uint64_t>(std::llround(scenario.block_duration_s));
  for (long long k = 0; k < scenario.n_blocks; ++k) {
    auto block = sim.next_block();
    for (int ch = 0; ch < 4; ++ch) {
      TagBlock tb;
      tb.epoch_s = static_cast<std::uint64_t>(k) * block_s;
      tb.tags = std::move(block[static_cast<std::size_t>(ch)]);
      streams[static_cast<std::size_t>(ch)].blocks.push_back(std::move(tb));
    }
  }
  return streams;
}

}  // namespace qttf
