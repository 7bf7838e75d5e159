// Clock models and slow delay-drift processes.
//
// A clock's reading of an event at absolute time t is t + offset(t); the
// inter-site time difference recovered by the two-way combination is
// offset_a - offset_b. Fiber delay drift is modeled as slow additive
// processes on the transmission leg (common to both directions, since a
// single bidirectional fiber carries them) and on each site's compensation
// fiber. Stochastic processes are realized once on a block-spaced grid and
// evaluated read-only afterwards, so concurrent block processing is safe
// and replay under a fixed seed is exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qttf/physics.hpp"
#include "qttf/rng.hpp"

namespace qttf {

enum class Site { a, b };
enum class Direction { a_to_b, b_to_a };

struct ClockModel {
  double initial_offset_s = 0.0;
  double frequency_offset = 0.0;           // s/s
  double random_walk_s_per_sqrt_s = 0.0;   // white-FM phase random walk
  double epoch_s = 0.0;
};

// Piecewise-linear temperature record, clamped outside its node range.
struct TemperatureTrace {
  std::vector<double> time_s;
  std::vector<double> kelvin;

  double at(double t) const {
    if (time_s.empty()) return 0.0;
    if (t <= time_s.front()) return kelvin.front();
    if (t >= time_s.back()) return kelvin.back();
    const auto it = std::upper_bound(time_s.begin(), time_s.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - time_s.begin());
    const double f = (t - time_s[i - 1]) / (time_s[i] - time_s[i - 1]);
    return kelvin[i - 1] + f * (kelvin[i] - kelvin[i - 1]);
  }
};

// Air-conditioned lab: periodic 18.7..20.3 C cycle.
inline TemperatureTrace lab_periodic_trace(double duration_s, double period_s = 1200.0) {
  TemperatureTrace tr;
  const double dt = std::min(60.0, period_s / 16.0);
  for (double t = 0.0; t <= duration_s + dt; t += dt) {
    tr.time_s.push_back(t);
    tr.kelvin.push_back(19.5 + 0.8 * std::sin(2.0 * std::numbers::pi * t / period_s));
  }
  return tr;
}

// Unconditioned lab: bounded random walk within 17.1..23.8 C.
inline TemperatureTrace lab_irregular_trace(double duration_s, std::uint64_t seed) {
  TemperatureTrace tr;
  Rng rng(seed);
  const double dt = 60.0;
  double temp = 20.0;
  for (double t = 0.0; t <= duration_s + dt; t += dt) {
    tr.time_s.push_back(t);
    tr.kelvin.push_back(temp);
    temp = std::clamp(temp + rng.normal(0.0, 0.15), 17.1, 23.8);
  }
  return tr;
}

enum class DriftKind { constant, sinusoidal, random_walk, temperature_linear };

struct DriftProcess {
  DriftKind kind = DriftKind::constant;
  double amplitude_s = 0.0;                    // constant offset / sinusoid amplitude
  double period_s = 0.0;                       // sinusoidal
  double phase_rad = 0.0;                      // sinusoidal
  double random_walk_s_per_sqrt_s = 0.0;       // random-walk
  // Temperature-linear: delay change = coeff * length * (T(t) - T(start)).
  // The default coefficient is a configuration value for SMF-class fiber,
  // not a measured input; runs that use it state it in their metadata.
  double temperature_coeff_s_per_k_m = 3.8e-14;
  double length_scale_m = 0.0;
  TemperatureTrace temperature_trace;
};

inline DriftProcess no_drift() { return DriftProcess{}; }

inline DriftProcess sinusoidal_drift(double amplitude_s, double period_s, double phase_rad = 0.0) {
  DriftProcess d;
  d.kind = DriftKind::sinusoidal;
  d.amplitude_s = amplitude_s;
  d.period_s = period_s;
  d.phase_rad = phase_rad;
  return d;
}

inline DriftProcess random_walk_drift(double coeff_s_per_sqrt_s) {
  DriftProcess d;
  d.kind = DriftKind::random_walk;
  d.random_walk_s_per_sqrt_s = coeff_s_per_sqrt_s;
  return d;
}

// How the two sites' compensation-fiber drifts relate:
//   shared      one physical DCF, both sites see the identical process
//   co_located  separate DCFs, identical statistics, independent realizations
//   remote      separate DCFs in uncorrelated environments
enum class DcfCorrelation { shared, co_located, remote };

struct DriftTopology {
  DriftProcess transmission;      // applied identically to both directions
  DriftProcess compensation_a;
  DriftProcess compensation_b;
  DcfCorrelation correlation = DcfCorrelation::shared;
};

// One drift process realized over [0, duration]: deterministic kinds are
// evaluated in closed form, the random walk on a node grid with linear
// interpolation in between.
class DriftRealization {
 public:
  DriftRealization() = default;

  DriftRealization(const DriftProcess& process, double duration_s, double node_spacing_s,
                   std::uint64_t seed)
      : process_(process), node_spacing_s_(node_spacing_s) {
    if (process.kind == DriftKind::random_walk) {
      Rng rng(seed);
      const double step = process.random_walk_s_per_sqrt_s * std::sqrt(node_spacing_s);
      double value = 0.0;
      const auto n_nodes = static_cast<std::size_t>(std::ceil(duration_s / node_spacing_s)) + 2;
      nodes_.reserve(n_nodes);
      for (std::size_t i = 0; i < n_nodes; ++i) {
        nodes_.push_back(value);
        value += step * rng.normal();
      }
    }
  }

  double at(double t_s) const {
    switch (process_.kind) {
      case DriftKind::constant:
        return process_.amplitude_s;
      case DriftKind::sinusoidal:
        if (process_.period_s <= 0.0) return 0.0;
        return process_.amplitude_s *
               std::sin(2.0 * std::numbers::pi * t_s / process_.period_s + process_.phase_rad);
      case DriftKind::random_walk: {
        if (nodes_.empty()) return 0.0;
        const double x = std::clamp(t_s / node_spacing_s_, 0.0,
                                    static_cast<double>(nodes_.size() - 1));
        const auto i = static_cast<std::size_t>(x);
        if (i + 1 >= nodes_.size()) return nodes_.back();
        const double f = x - static_cast<double>(i);
        return nodes_[i] + f * (nodes_[i + 1] - nodes_[i]);
      }
      case DriftKind::temperature_linear: {
        const TemperatureTrace& tr = process_.temperature_trace;
        if (tr.time_s.empty()) return 0.0;
        return process_.temperature_coeff_s_per_k_m * process_.length_scale_m *
               (tr.at(t_s) - tr.kelvin.front());
      }
    }
    return 0.0;
  }

 private:
  DriftProcess process_;
  double node_spacing_s_ = 1.0;
  std::vector<double> nodes_;
};

// Topology with its three drift processes realized. The shared correlation
// forces both compensation legs onto one realization; co_located keeps both
// sites' parameters from compensation_a but draws independent realizations.
class RealizedTopology {
 public:
  RealizedTopology() = default;

  RealizedTopology(const DriftTopology& topology, double duration_s, double node_spacing_s,
                   std::uint64_t root_seed)
      : transmission_(topology.transmission, duration_s, node_spacing_s,
                      derive_seed(root_seed, 0x7453u)) {
    switch (topology.correlation) {
      case DcfCorrelation::shared:
        compensation_a_ = DriftRealization(topology.compensation_a, duration_s, node_spacing_s,
                                           derive_seed(root_seed, 0xDCFAu));
        compensation_b_ = compensation_a_;
        break;
      case DcfCorrelation::co_located:
        compensation_a_ = DriftRealization(topology.compensation_a, duration_s, node_spacing_s,
                                           derive_seed(root_seed, 0xDCFAu));
        compensation_b_ = DriftRealization(topology.compensation_a, duration_s, node_spacing_s,
                                           derive_seed(root_seed, 0xDCFBu));
        break;
      case DcfCorrelation::remote:
        compensation_a_ = DriftRealization(topology.compensation_a, duration_s, node_spacing_s,
                                           derive_seed(root_seed, 0xDCFAu));
        compensation_b_ = DriftRealization(topology.compensation_b, duration_s, node_spacing_s,
                                           derive_seed(root_seed, 0xDCFBu));
        break;
    }
  }

  double transmission_drift(double t_s) const { return transmission_.at(t_s); }

  double compensation_drift(Site site, double t_s) const {
    return site == Site::a ? compensation_a_.at(t_s) : compensation_b_.at(t_s);
  }

 private:
  DriftRealization transmission_;
  DriftRealization compensation_a_;
  DriftRealization compensation_b_;
};

// Transmission-leg delay seen by a direction at time t. The drift term is
// common mode: both directions evaluate the same realization, which is what
// the two-way combination cancels.
inline double path_delay_at(const RealizedTopology& topology, const LinkConfig& link,
                            double t_s, Direction) {
  return link.transmission.group_delay_s() + topology.transmission_drift(t_s);
}

inline double compensation_delay_at(const RealizedTopology& topology, const LinkConfig& link,
                                    double t_s, Site site) {
  return link.compensation.group_delay_s() + topology.compensation_drift(site, t_s);
}

// Clock offset trajectory; the random-walk term is realized on a node grid.
class RealizedClock {
 public:
  RealizedClock() = default;

  RealizedClock(const ClockModel& model, double duration_s, double node_spacing_s,
                std::uint64_t seed)
      : model_(model) {
    if (model.random_walk_s_per_sqrt_s != 0.0) {
      DriftProcess rw = random_walk_drift(model.random_walk_s_per_sqrt_s);
      walk_ = DriftRealization(rw, duration_s, node_spacing_s, seed);
      has_walk_ = true;
    }
  }

  double offset_at(double t_s) const {
    if (t_s < model_.epoch_s) throw std::domain_error("clock: t before epoch");
    double offset = model_.initial_offset_s + model_.frequency_offset * (t_s - model_.epoch_s);
    if (has_walk_) offset += walk_.at(t_s - model_.epoch_s);
    return offset;
  }

 private:
  ClockModel model_;
  DriftRealization walk_;
  bool has_walk_ = false;
};

inline double clock_offset_at(const RealizedClock& clock, double t_s) {
  return clock.offset_at(t_s);
}

}  // namespace qttf
