#pragma once

namespace tadt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tadt
