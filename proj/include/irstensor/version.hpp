#pragma once

namespace irstensor {
inline constexpr const char* kVersion = "0.1.0";
}
