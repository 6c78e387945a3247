#pragma once

namespace armwave {

inline constexpr double kPi = 3.141592653589793238462643383279;
inline constexpr double kFtToM = 0.3048;
inline constexpr double kSpeedOfLight = 299792458.0; // m/s

} // namespace armwave
