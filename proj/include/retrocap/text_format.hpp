#pragma once

#include <cstdio>
#include <string>

namespace retrocap {

// Locale-independent number formatting for reports (byte-stable output).
inline std::string format_real(double v, int significant = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, v);
  return buf;
}

inline std::string format_fixed(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace retrocap
