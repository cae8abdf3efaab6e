#pragma once

namespace esrstm {

inline constexpr const char* kVersion = "1.0.0";

} // namespace esrstm
