// Unit conventions used throughout the library.
//
// Event timestamps are integer femtoseconds relative to a block epoch
// (integer seconds); femtosecond integers avoid floating-point drift over
// multi-hour runs. Closed-form physics works in SI seconds (double).

#pragma once

#include <cmath>
#include <cstdint>

namespace qttf {

// Gaussian FWHM = kFwhmPerSigma * sigma. 2.355 is the conventional rounded
// factor; the whole analytic chain uses it consistently.
inline constexpr double kFwhmPerSigma = 2.355;

inline constexpr double kFsPerSecond = 1e15;
inline constexpr double kSecondsPerFs = 1e-15;

using TimeFs = std::int64_t;

inline double fs_to_s(TimeFs t) { return static_cast<double>(t) * kSecondsPerFs; }
inline double fs_to_s(double t) { return t * kSecondsPerFs; }
inline TimeFs s_to_fs(double t) { return static_cast<TimeFs>(std::llround(t * kFsPerSecond)); }

inline double fwhm_to_sigma(double fwhm) { return fwhm / kFwhmPerSigma; }
inline double sigma_to_fwhm(double sigma) { return sigma * kFwhmPerSigma; }

// Convenience literal-style factors for config/reporting code.
inline constexpr double kPs = 1e-12;
inline constexpr double kNs = 1e-9;
inline constexpr double kUs = 1e-6;
inline constexpr double kKm = 1e3;

}  // namespace qttf
