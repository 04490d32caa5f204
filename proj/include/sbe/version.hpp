#pragma once

namespace sbe {

inline constexpr const char* version = "0.1.0";

}  // namespace sbe
