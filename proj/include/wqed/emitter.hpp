#pragma once

// Single two-level emitter coupled to a single-mode waveguide: steady-state
// optical Bloch solution, coherent scattering amplitudes and drive-strength
// conversions.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wqed/errors.hpp"
#include "wqed/units.hpp"

namespace wqed {

struct EmitterParams {
    double nu0 = 0.0;               // THz
    double gamma = 1.0;             // total radiative decay, rad/ns
    double beta = 0.0;              // waveguide coupling fraction
    double gamma_d = 0.0;           // pure dephasing, rad/ns
    double sigma_sd = 0.0;          // slow spectral diffusion std-dev, rad/ns
    double dipole_splitting = 0.0;  // offset of the orthogonal dipole, rad/ns; 0 disables it
    std::optional<double> second_beta;  // coupling of the orthogonal dipole, defaults to beta
    double tuning_slope = 0.0;      // Stark coefficient, rad/ns per V
    double v_ref = 0.0;             // V

    /// gamma/2 + gamma_d, the optical coherence decay.
    double coherence_decay() const noexcept { return 0.5 * gamma + gamma_d; }

    void validate() const {
        auto finite = [](double x) { return std::isfinite(x); };
        if (!finite(nu0) || !finite(gamma) || !finite(beta) || !finite(gamma_d) ||
            !finite(sigma_sd) || !finite(dipole_splitting) || !finite(tuning_slope) ||
            !finite(v_ref))
            throw ValidationError("emitter parameters must be finite");
        if (!(gamma > 0.0)) throw ValidationError("emitter gamma must be > 0");
        if (beta < 0.0 || beta > 1.0) throw ValidationError("emitter beta must lie in [0, 1]");
        if (gamma_d < 0.0) throw ValidationError("emitter gamma_d must be >= 0");
        if (sigma_sd < 0.0) throw ValidationError("emitter sigma_sd must be >= 0");
        if (second_beta && (*second_beta < 0.0 || *second_beta > 1.0))
            throw ValidationError("emitter second_beta must lie in [0, 1]");
    }
};

struct DriveField {
    double nu_p = 0.0;   // THz
    double omega = 0.0;  // Rabi frequency, rad/ns
};

struct ScatterAmplitudes {
    cplx t{1.0, 0.0};
    cplx r{0.0, 0.0};

    double transmission() const { return std::norm(t); }
    double reflection() const { return std::norm(r); }
};

struct BlochState {
    double rho_ee = 0.0;
    cplx rho_ge{0.0, 0.0};
};

namespace detail {
// Denominator shared by all steady-state expressions.
inline double bloch_denominator(double delta, double omega, const EmitterParams& em) {
    const double g2 = em.coherence_decay();
    return delta * delta + g2 * g2 + omega * omega * g2 / em.gamma;
}
}  // namespace detail

/// Closed-form steady state of the driven two-level Bloch equations with
/// H = delta |e><e| + (omega/2)(|e><g| + |g><e|), delta = laser - resonance.
inline BlochState bloch_steady_state(double delta, const DriveField& drive,
                                     const EmitterParams& em) {
    const double g2 = em.coherence_decay();
    const double omega = drive.omega;
    const double d = detail::bloch_denominator(delta, omega, em);
    BlochState s;
    s.rho_ee = 0.5 * omega * omega * (g2 / em.gamma) / d;
    s.rho_ge = -0.5 * omega * cplx(delta, -g2) / d;
    return s;
}

/// Coherent forward/backward amplitudes of a symmetric point emitter; r = t - 1.
inline ScatterAmplitudes single_scatter(double delta, const DriveField& drive,
                                        const EmitterParams& em) {
    const double g2 = em.coherence_decay();
    const double d = detail::bloch_denominator(delta, drive.omega, em);
    const cplx r = -0.5 * em.beta * em.gamma * cplx(g2, -delta) / d;
    return {1.0 + r, r};
}

/// Omega -> 0 limit of single_scatter.
inline ScatterAmplitudes weak_scatter(double delta, const EmitterParams& em) {
    const cplx r = -0.5 * em.beta * em.gamma / cplx(em.coherence_decay(), delta);
    return {1.0 + r, r};
}

/// Proportionality in omega^2 = coefficient * beta * gamma * flux.
struct RabiFluxMapping {
    double coefficient = 2.0;
};

/// Photon flux (photons/ns) -> Rabi frequency (rad/ns).
inline double flux_to_rabi(double flux, const EmitterParams& em,
                           const RabiFluxMapping& mapping = {}) {
    if (flux < 0.0) throw ValidationError("photon flux must be >= 0");
    return std::sqrt(mapping.coefficient * em.beta * em.gamma * flux);
}

inline double rabi_to_flux(double omega, const EmitterParams& em,
                           const RabiFluxMapping& mapping = {}) {
    if (omega < 0.0) throw ValidationError("Rabi frequency must be >= 0");
    if (omega == 0.0) return 0.0;
    const double k = mapping.coefficient * em.beta * em.gamma;
    if (!(k > 0.0)) throw ValidationError("flux is undefined for an uncoupled emitter");
    return omega * omega / k;
}

/// Inelastically scattered forward flux normalised to the input flux.
inline double incoherent_forward_fraction(double delta, const DriveField& drive,
                                          const EmitterParams& em,
                                          const RabiFluxMapping& mapping = {}) {
    if (em.beta == 0.0) return 0.0;
    const double flux = rabi_to_flux(drive.omega, em, mapping);
    if (flux == 0.0) throw ValidationError("incoherent fraction needs a non-zero photon flux");
    const BlochState s = bloch_steady_state(delta, drive, em);
    return 0.5 * em.beta * em.gamma * (s.rho_ee - std::norm(s.rho_ge)) / flux;
}

/// Same as incoherent_forward_fraction but for an emitter driven by a local
/// Rabi frequency while the input flux is set by omega_in.
inline double incoherent_forward_fraction(double delta, double omega_local, double omega_in,
                                          const EmitterParams& em,
                                          const RabiFluxMapping& mapping = {}) {
    if (em.beta == 0.0 || omega_local == 0.0) return 0.0;
    const double flux = rabi_to_flux(omega_in, em, mapping);
    if (flux == 0.0) throw ValidationError("incoherent fraction needs a non-zero photon flux");
    const BlochState s = bloch_steady_state(delta, DriveField{0.0, omega_local}, em);
    return 0.5 * em.beta * em.gamma * (s.rho_ee - std::norm(s.rho_ge)) / flux;
}

/// Linear Stark law; returns THz.
inline double stark_frequency(const EmitterParams& em, double volts) {
    return em.nu0 + angular_to_thz(em.tuning_slope * (volts - em.v_ref));
}

/// Power-broadened excitation line, unit peak, FWHM^2 = 4 g2^2 + 4 omega^2 g2 / gamma.
inline double source_lorentzian(double delta, double omega, const EmitterParams& em) {
    const double g2 = em.coherence_decay();
    const double hw2 = g2 * g2 + omega * omega * g2 / em.gamma;
    return hw2 / (delta * delta + hw2);
}

inline double power_broadened_fwhm(const EmitterParams& em, double omega) {
    const double g2 = em.coherence_decay();
    return 2.0 * std::sqrt(g2 * g2 + omega * omega * g2 / em.gamma);
}

/// Calls f once per optical transition, each as a single-dipole emitter
/// (nu0 shifted, second_beta applied, splitting cleared).
template <class F>
void for_each_dipole_transition(const EmitterParams& em, F&& f) {
    EmitterParams first = em;
    first.dipole_splitting = 0.0;
    first.second_beta.reset();
    f(first);
    if (em.dipole_splitting != 0.0) {
        first.nu0 = em.nu0 + angular_to_thz(em.dipole_splitting);
        first.beta = em.second_beta.value_or(em.beta);
        f(first);
    }
}

inline std::vector<EmitterParams> dipole_transitions(const EmitterParams& em) {
    std::vector<EmitterParams> out;
    for_each_dipole_transition(em, [&](const EmitterParams& t) { out.push_back(t); });
    return out;
}

}  // namespace wqed
