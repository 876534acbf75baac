#include "stqa/format.hpp"

#include <cmath>
#include <cstdio>

namespace stqa {

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double r = std::round(value * scale) / scale;
  return r == 0.0 ? 0.0 : r;
}

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value == 0.0 ? 0.0 : value);
  return buf;
}

}  // namespace stqa
