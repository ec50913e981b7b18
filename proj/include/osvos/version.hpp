#pragma once

namespace osvos {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace osvos
