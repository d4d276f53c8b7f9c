#pragma once

#include <cmath>
#include <numbers>

// SI scale factors. Every quantity inside the library is stored in SI
// (seconds, hertz, metres, radians); these constants exist so call sites
// read like the lab notebook: `17.0 * units::us`.
namespace ionsim::units {

inline constexpr double s = 1.0;
inline constexpr double ms = 1e-3;
inline constexpr double us = 1e-6;
inline constexpr double ns = 1e-9;

inline constexpr double Hz = 1.0;
inline constexpr double kHz = 1e3;
inline constexpr double MHz = 1e6;
inline constexpr double GHz = 1e9;
inline constexpr double THz = 1e12;

inline constexpr double m = 1.0;
inline constexpr double mm = 1e-3;
inline constexpr double um = 1e-6;
inline constexpr double nm = 1e-9;

inline constexpr double per_mm = 1e3;

inline constexpr double rad = 1.0;
inline constexpr double deg = std::numbers::pi / 180.0;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace ionsim::units
