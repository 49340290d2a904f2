#pragma once

namespace dechw {

inline constexpr const char* kVersion = "dechw 0.1.0";

}  // namespace dechw
