#pragma once

namespace ks {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ks
