#pragma once

#include <complex>

namespace ntn {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLightMps = 299792458.0;

}  // namespace ntn
