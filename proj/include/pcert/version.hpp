#pragma once

namespace pcert {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace pcert
