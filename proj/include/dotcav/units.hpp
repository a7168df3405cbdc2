#pragma once

#include <cmath>

// Unit convention used throughout the library:
//
//   * every energy is stored as an ordinary frequency E/h, in Hz;
//   * every angular rate (g0, delta_omega, g_dy, kappa, omega_r) is stored
//     as omega/2pi, in Hz.
//
// In these units the coupling, steady-state and IQ formulas hold verbatim
// with all hbar and 2pi factors eliminated. Conversions from lab units
// (ueV, eV, dBm, kelvin, volts) happen only at I/O boundaries.
namespace dotcav::units {

// 1 ueV expressed as E/h.
inline constexpr double ueV_to_hz = 241.798935e6;

// 1 eV expressed as E/h.
inline constexpr double eV_to_hz = 2.41798935e14;

// Boltzmann constant, eV/K.
inline constexpr double k_boltzmann_ev = 8.617333e-5;

// von Klitzing constant h/e^2, ohm.
inline constexpr double klitzing_ohm = 25812.807;

inline double hz_to_ueV(double hz) { return hz / ueV_to_hz; }
inline double ueV_to_hz_f(double uev) { return uev * ueV_to_hz; }

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

inline double ghz(double x) { return x * 1e9; }
inline double mhz(double x) { return x * 1e6; }
inline double khz(double x) { return x * 1e3; }

} // namespace dotcav::units
