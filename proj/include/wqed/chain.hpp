#pragma once

// Several emitters along one waveguide: propagation phases, transfer-matrix
// composition, the coupled-dipole linear solution, the saturating mean-field
// model, and the two fluorescence-filtering configurations.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "wqed/emitter.hpp"
#include "wqed/errors.hpp"
#include "wqed/transfer.hpp"
#include "wqed/units.hpp"

namespace wqed {

/// One-way phase split into whole turns and a residual in [0, 2*pi).
struct PropagationPhase {
    long long winding = 0;
    double residual = 0.0;

    static PropagationPhase from_total(double radians) {
        const double turns = std::floor(radians / two_pi);
        PropagationPhase p{static_cast<long long>(turns), radians - turns * two_pi};
        if (p.residual >= two_pi) {
            p.residual -= two_pi;
            ++p.winding;
        }
        if (p.residual < 0.0) p.residual = 0.0;
        return p;
    }

    double total() const { return two_pi * static_cast<double>(winding) + residual; }
};

/// 2*pi * nu * d / v_g for separation in um, group velocity in m/s, nu in THz.
inline PropagationPhase phase_from_geometry(double separation_um, double group_velocity,
                                            double nu_thz) {
    if (!(separation_um > 0.0)) throw ValidationError("separation must be > 0");
    if (!(group_velocity > 0.0)) throw ValidationError("group velocity must be > 0");
    if (nu_thz < 0.0) throw ValidationError("frequency must be >= 0");
    const double cycles = (nu_thz * 1e12) * (separation_um * 1e-6) / group_velocity;
    double whole = std::floor(cycles);
    double frac = cycles - whole;
    // Snap round-off just below an integer number of wavelengths.
    if (1.0 - frac < 1e-12) {
        whole += 1.0;
        frac = 0.0;
    }
    return {static_cast<long long>(whole), two_pi * frac};
}

struct ChainSpec {
    std::vector<EmitterParams> emitters;   // left to right
    std::vector<PropagationPhase> phases;  // emitters.size() - 1 entries
    double phase_dispersion = 0.0;         // d(phi)/d(omega), ns
    double phase_reference_thz = std::numeric_limits<double>::quiet_NaN();  // defaults to emitters[0].nu0

    void validate() const {
        if (emitters.empty()) throw ValidationError("chain needs at least one emitter");
        if (phases.size() + 1 != emitters.size())
            throw ValidationError("chain needs exactly one phase per adjacent emitter pair");
        for (const auto& em : emitters) em.validate();
        if (!std::isfinite(phase_dispersion))
            throw ValidationError("phase_dispersion must be finite");
    }

    /// One-way phase between emitter i and i+1 at the probe frequency.
    double phase_at(std::size_t i, double nu_p) const {
        double phi = phases[i].total();
        if (phase_dispersion != 0.0) {
            const double ref =
                std::isnan(phase_reference_thz) ? emitters.front().nu0 : phase_reference_thz;
            phi += phase_dispersion * angular_detuning(nu_p, ref);
        }
        return phi;
    }
};

/// A single dipole transition at a phase position along the guide.
struct PointScatterer {
    EmitterParams em;
    double delta = 0.0;     // laser - transition, rad/ns
    double position = 0.0;  // accumulated one-way phase from the first emitter, rad
};

/// Expands the chain into point scatterers at probe frequency nu_p. Optional
/// per-emitter resonance shifts (rad/ns) move both transitions of an emitter.
inline std::vector<PointScatterer> build_scatterers(const ChainSpec& chain, double nu_p,
                                                    std::span<const double> shifts = {}) {
    std::vector<PointScatterer> out;
    out.reserve(2 * chain.emitters.size());
    double position = 0.0;
    for (std::size_t i = 0; i < chain.emitters.size(); ++i) {
        if (i > 0) position += chain.phase_at(i - 1, nu_p);
        const double shift = i < shifts.size() ? shifts[i] : 0.0;
        for_each_dipole_transition(chain.emitters[i], [&](const EmitterParams& tr) {
            out.push_back({tr, angular_detuning(nu_p, tr.nu0) - shift, position});
        });
    }
    return out;
}

/// Transfer-matrix composition, each scatterer at the bare drive omega.
inline ScatterAmplitudes transfer_scatter(std::span<const PointScatterer> scatterers,
                                          double omega) {
    TransferMatrix total;
    double last = scatterers.empty() ? 0.0 : scatterers.front().position;
    for (const auto& s : scatterers) {
        if (s.position != last) total = propagation_matrix(s.position - last) * total;
        last = s.position;
        const auto amps = omega == 0.0 ? weak_scatter(s.delta, s.em)
                                       : single_scatter(s.delta, DriveField{0.0, omega}, s.em);
        total = emitter_transfer_matrix(amps) * total;
    }
    return amplitudes_from_transfer(total);
}

inline ScatterAmplitudes chain_scatter(const ChainSpec& chain, double nu_p,
                                       const DriveField& drive) {
    const auto sc = build_scatterers(chain, nu_p);
    return transfer_scatter(sc, drive.omega);
}

/// Linear coupled-dipole solution for two single-transition emitters, with
/// waveguide-mediated dissipative (cos) and dispersive (sin) couplings.
inline ScatterAmplitudes coupled_two_emitter_weak(const EmitterParams& em1,
                                                  const EmitterParams& em2, double delta1,
                                                  double delta2, double phi) {
    const double g1 = std::sqrt(0.5 * em1.beta * em1.gamma);
    const double g2 = std::sqrt(0.5 * em2.beta * em2.gamma);
    const double root = std::sqrt(em1.beta * em1.gamma * em2.beta * em2.gamma);
    const double gamma12 = root * std::cos(phi);
    const double j12 = 0.5 * root * std::sin(phi);
    const cplx c{0.5 * gamma12, j12};
    const cplx a11{em1.coherence_decay(), delta1};
    const cplx a22{em2.coherence_decay(), delta2};
    const cplx ephi = std::polar(1.0, phi);
    const cplx b1 = g1;
    const cplx b2 = g2 * ephi;
    const cplx det = a11 * a22 - c * c;
    if (std::abs(det) == 0.0) throw ValidationError("singular coupled-dipole system");
    const cplx s1 = (a22 * b1 - c * b2) / det;
    const cplx s2 = (a11 * b2 - c * b1) / det;
    return {ephi * (1.0 - g1 * s1) - g2 * s2, -g1 * s1 - g2 * ephi * s2};
}

struct MeanFieldOptions {
    int max_iter = 500;
    double tol = 1e-10;
    double damping = 0.5;
};

struct MeanFieldSolution {
    ScatterAmplitudes amps;
    std::vector<cplx> local_field;  // total field at each scatterer, input-normalised
    int iterations = 0;
    double residual = 0.0;
};

/// Self-consistent steady state in which every scatterer responds via
/// single_scatter to its local field (input plus all other scatterers'
/// re-radiation). Starts from the uncoupled responses.
inline MeanFieldSolution mean_field_scatter(std::span<const PointScatterer> sc, double omega,
                                            const MeanFieldOptions& opts = {}) {
    const std::size_t n = sc.size();
    MeanFieldSolution sol;
    if (n == 0) return sol;
    if (n == 1) {
        const cplx in = std::polar(1.0, sc[0].position);
        const cplx p = single_scatter(sc[0].delta, DriveField{0.0, omega}, sc[0].em).r * in;
        sol.local_field = {in};
        sol.amps = {in + p, p * in};
        sol.iterations = 1;
        return sol;
    }

    std::vector<cplx> input(n), to_right(n), between(n * n);
    const double last = sc.back().position;
    for (std::size_t j = 0; j < n; ++j) {
        input[j] = std::polar(1.0, sc[j].position);
        to_right[j] = std::polar(1.0, last - sc[j].position);
        for (std::size_t k = 0; k < n; ++k)
            between[j * n + k] = std::polar(1.0, std::abs(sc[j].position - sc[k].position));
    }
    auto response = [&](std::size_t j, const cplx& field) {
        const double local = omega * std::abs(field);
        return single_scatter(sc[j].delta, DriveField{0.0, local}, sc[j].em).r * field;
    };
    auto transmitted = [&](const std::vector<cplx>& p) {
        cplx t = std::polar(1.0, last);
        for (std::size_t k = 0; k < n; ++k) t += p[k] * to_right[k];
        return t;
    };
    auto fields = [&](const std::vector<cplx>& p, std::vector<cplx>& e) {
        for (std::size_t j = 0; j < n; ++j) {
            cplx f = input[j];
            for (std::size_t k = 0; k < n; ++k)
                if (k != j) f += p[k] * between[j * n + k];
            e[j] = f;
        }
    };

    std::vector<cplx> p(n), e(n);
    for (std::size_t j = 0; j < n; ++j) p[j] = response(j, input[j]);

    cplx t_prev = transmitted(p);
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    while (it < opts.max_iter) {
        ++it;
        fields(p, e);
        for (std::size_t j = 0; j < n; ++j)
            p[j] = (1.0 - opts.damping) * p[j] + opts.damping * response(j, e[j]);
        const cplx t = transmitted(p);
        residual = std::abs(t - t_prev);
        t_prev = t;
        if (residual < opts.tol) break;
    }
    if (!(residual < opts.tol))
        throw NonConvergence("mean-field iteration did not converge", residual, it, p);

    fields(p, e);
    cplx r{0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) r += p[k] * input[k];
    sol.amps = {t_prev, r};
    sol.local_field = e;
    sol.iterations = it;
    sol.residual = residual;
    return sol;
}

/// Every scatterer saturated by the bare input only; no re-scattering.
inline ScatterAmplitudes product_scatter(std::span<const PointScatterer> sc, double omega) {
    cplx t{1.0, 0.0};
    cplx r{0.0, 0.0};
    cplx round_trip{1.0, 0.0};  // product of t_k^2 for scatterers already passed
    for (const auto& s : sc) {
        const auto a = single_scatter(s.delta, DriveField{0.0, omega}, s.em);
        r += round_trip * std::polar(1.0, 2.0 * s.position) * a.r;
        t *= a.t;
        round_trip *= a.t * a.t;
    }
    if (!sc.empty()) t *= std::polar(1.0, sc.back().position);
    return {t, r};
}

inline ScatterAmplitudes coupled_two_emitter_saturating(const ChainSpec& chain, double nu_p,
                                                        const DriveField& drive,
                                                        int max_iter = 500, double tol = 1e-10) {
    if (chain.emitters.size() != 2)
        throw ValidationError("coupled_two_emitter_saturating needs two emitters");
    const auto sc = build_scatterers(chain, nu_p);
    MeanFieldOptions opts;
    opts.max_iter = max_iter;
    opts.tol = tol;
    return mean_field_scatter(sc, drive.omega, opts).amps;
}

inline ScatterAmplitudes uncoupled_two_emitter(const ChainSpec& chain, double nu_p,
                                               const DriveField& drive) {
    if (chain.emitters.size() != 2)
        throw ValidationError("uncoupled_two_emitter needs two emitters");
    const auto sc = build_scatterers(chain, nu_p);
    return product_scatter(sc, drive.omega);
}

/// Weak-drive amplitudes of one emitter including its orthogonal dipole.
inline ScatterAmplitudes emitter_weak_amplitudes(const EmitterParams& em, double nu_p,
                                                 double shift = 0.0) {
    std::vector<PointScatterer> sc;
    for (const auto& tr : dipole_transitions(em))
        sc.push_back({tr, angular_detuning(nu_p, tr.nu0) - shift, 0.0});
    return transfer_scatter(sc, 0.0);
}

/// Source emitter's fluorescence filtered by transmission through a second
/// emitter. detuning12 = nu_source - nu_filter in rad/ns; the filter stays at
/// its own nu0. Shifts are extra resonance offsets (spectral diffusion).
inline double rf1_spectrum(const EmitterParams& source, const EmitterParams& filter,
                           double nu_p, const DriveField& drive, double detuning12,
                           double amplitude, double background, double source_shift = 0.0,
                           double filter_shift = 0.0) {
    const double nu_src = filter.nu0 + angular_to_thz(detuning12);
    const double line =
        source_lorentzian(angular_detuning(nu_p, nu_src) - source_shift, drive.omega, source);
    const double filt = emitter_weak_amplitudes(filter, nu_p, filter_shift).transmission();
    return amplitude * line * filt + background;
}

/// Source emission to the right interfering with its left emission reflected
/// by the mirror emitter after a round trip 2*phi. detuning12 =
/// nu_mirror - nu_source in rad/ns; the source stays at its own nu0.
inline double rf2_spectrum(const EmitterParams& source, const EmitterParams& mirror,
                           double nu_p, const DriveField& drive, double detuning12, double phi,
                           double amplitude, double background, double source_shift = 0.0,
                           double mirror_shift = 0.0) {
    EmitterParams m = mirror;
    m.nu0 = source.nu0 + angular_to_thz(detuning12);
    const double line =
        source_lorentzian(angular_detuning(nu_p, source.nu0) - source_shift, drive.omega, source);
    const cplx r = emitter_weak_amplitudes(m, nu_p, mirror_shift).r;
    return amplitude * line * std::norm(1.0 + r * std::polar(1.0, 2.0 * phi)) + background;
}

}  // namespace wqed
