#pragma once

#include <complex>
#include <numbers>

namespace wqed {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Internal rates and detunings are angular, rad/ns. Optical frequencies are
// kept in THz; relative frequencies at the IO boundary are linear GHz.
inline constexpr double thz_to_ghz = 1.0e3;

/// THz difference -> rad/ns.
constexpr double angular_detuning(double nu_p_thz, double nu0_thz) {
    return two_pi * (nu_p_thz - nu0_thz) * thz_to_ghz;
}

constexpr double ghz_to_angular(double ghz) { return two_pi * ghz; }
constexpr double angular_to_ghz(double rad_per_ns) { return rad_per_ns / two_pi; }

/// rad/ns offset expressed as a THz offset.
constexpr double angular_to_thz(double rad_per_ns) {
    return rad_per_ns / (two_pi * thz_to_ghz);
}

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// FWHM of a Gaussian in units of its standard deviation.
inline constexpr double gaussian_fwhm_per_sigma = 2.3548200450309493;

}  // namespace wqed
