#pragma once

namespace gmsl {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kToolName = "gmsl";

} // namespace gmsl
