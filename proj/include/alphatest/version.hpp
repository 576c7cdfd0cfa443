#pragma once

#include <string_view>

namespace alphatest {

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr std::string_view kReportSchema = "1";

}  // namespace alphatest
