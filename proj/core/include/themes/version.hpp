#pragma once

namespace themes {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace themes
