#pragma once

namespace qttf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qttf
