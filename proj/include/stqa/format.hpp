#pragma once

#include <string>

namespace stqa {

// Rounds half away from zero to `decimals` places. Never returns -0.0.
double round_to(double value, int decimals);

// Fixed-point rendering of an already rounded value ("0.28", "0.500").
std::string fixed(double value, int decimals);

// Rendering precision used in question/answer text.
inline constexpr int kTimestampDecimals = 2;
inline constexpr int kSpeedDecimals = 3;

inline double round_timestamp(double t) { return round_to(t, kTimestampDecimals); }
inline double round_speed(double v) { return round_to(v, kSpeedDecimals); }

}  // namespace stqa
