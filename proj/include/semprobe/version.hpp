#pragma once

namespace semprobe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace semprobe
