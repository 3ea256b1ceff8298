#pragma once

namespace loja {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kReportVersion = 1;

} // namespace loja
