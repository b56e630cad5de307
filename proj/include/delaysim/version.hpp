#pragma once

namespace delaysim {

inline constexpr const char* version_string = "0.1.0";

}  // namespace delaysim
