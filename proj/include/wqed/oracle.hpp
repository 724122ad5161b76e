#pragma once

// Brute-force reference computations used to check the closed forms: direct
// time integration of the Bloch equations, a root-finding solution of the
// coupled steady state, and dense trapezoid convolution.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "wqed/chain.hpp"
#include "wqed/detector.hpp"
#include "wqed/emitter.hpp"
#include "wqed/errors.hpp"
#include "wqed/quadrature.hpp"
#include "wqed/units.hpp"

namespace wqed::oracle {

/// (rho_ee, Re rho_ge, Im rho_ge)
using BlochVector = std::array<double, 3>;

/// Bloch equations for a two-level emitter with detuning delta, decay gamma,
/// coherence decay g2, driven by complex coupling h (half the local Rabi
/// amplitude).
inline BlochVector bloch_rhs(const BlochVector& s, double delta, double gamma, double g2, cplx h) {
    const cplx rge{s[1], s[2]};
    const cplx reg = std::conj(rge);
    const cplx dee = -cplx{0.0, 1.0} * (h * rge - std::conj(h) * reg) - gamma * s[0];
    const cplx dge = cplx{-g2, delta} * rge - cplx{0.0, 1.0} * std::conj(h) * (2.0 * s[0] - 1.0);
    return {dee.real(), dge.real(), dge.imag()};
}

/// Steady state by RK4 integration from the ground state until one step
/// changes the state by less than `tol`.
inline BlochState integrate_bloch(double delta, double omega, const EmitterParams& em, double tol = 1e-12) {
    const double g2 = em.coherence_decay();
    const double rate = std::max({em.gamma, std::abs(delta), omega, g2});
    const double dt = 0.02 / rate;
    const cplx h = 0.5 * omega;
    BlochVector s{0.0, 0.0, 0.0};
    auto f = [&](const BlochVector& x) { return bloch_rhs(x, delta, em.gamma, g2, h); };
    auto axpy = [](const BlochVector& x, const BlochVector& k, double a) {
        return BlochVector{x[0] + a * k[0], x[1] + a * k[1], x[2] + a * k[2]};
    };
    const long max_steps = 200000000L;
    for (long step = 0; step < max_steps; ++step) {
        const auto k1 = f(s);
        const auto k2 = f(axpy(s, k1, 0.5 * dt));
        const auto k3 = f(axpy(s, k2, 0.5 * dt));
        const auto k4 = f(axpy(s, k3, dt));
        BlochVector next;
        double change = 0.0;
        for (int i = 0; i < 3; ++i) {
            next[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            change = std::max(change, std::abs(next[i] - s[i]));
        }
        s = next;
        if (change < tol && step > 10) return {s[0], cplx{s[1], s[2]}};
    }
    throw NonConvergence("Bloch integration did not settle", 0.0, 0, {});
}

/// Coupled steady state of point scatterers sharing the guide: every
/// transition obeys its own Bloch equations, driven by the input plus the
/// fields radiated by all others. Time integration brings the system near
/// the steady state; Newton iterations with a finite-difference Jacobian
/// then solve the stationarity conditions directly.
inline ScatterAmplitudes coupled_steady_state(std::span<const PointScatterer> sc, double omega) {
    const std::size_t n = sc.size();
    if (n == 0) return {cplx{1.0, 0.0}, cplx{0.0, 0.0}};
    if (!(omega > 0.0)) throw ValidationError("coupled steady-state oracle needs omega > 0");
    const double last = sc.back().position;

    // Radiated amplitude of scatterer k, input-normalised.
    auto radiated = [&](const Eigen::VectorXd& x, std::size_t k) {
        const cplx reg{x(3 * k + 1), -x(3 * k + 2)};
        return -cplx{0.0, 1.0} * (sc[k].em.beta * sc[k].em.gamma / omega) * reg;
    };
    auto local_field = [&](const Eigen::VectorXd& x, std::size_t j) {
        cplx e = std::polar(1.0, sc[j].position);
        for (std::size_t k = 0; k < n; ++k)
            if (k != j) e += radiated(x, k) * std::polar(1.0, std::abs(sc[j].position - sc[k].position));
        return e;
    };
    auto rhs = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd out(static_cast<long>(3 * n));
        for (std::size_t j = 0; j < n; ++j) {
            const BlochVector s{x(3 * j), x(3 * j + 1), x(3 * j + 2)};
            const auto d = bloch_rhs(s, sc[j].delta, sc[j].em.gamma, sc[j].em.coherence_decay(),
                                     0.5 * omega * local_field(x, j));
            for (int i = 0; i < 3; ++i) out(static_cast<long>(3 * j + i)) = d[static_cast<std::size_t>(i)];
        }
        return out;
    };

    double rate = omega;
    for (const auto& s : sc) rate = std::max({rate, s.em.gamma, std::abs(s.delta), s.em.coherence_decay()});
    const double dt = 0.01 / rate;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<long>(3 * n));
    for (long step = 0; step < 2000000L; ++step) {
        const Eigen::VectorXd k1 = rhs(x);
        const Eigen::VectorXd k2 = rhs(x + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = rhs(x + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = rhs(x + dt * k3);
        const Eigen::VectorXd next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double change = (next - x).cwiseAbs().maxCoeff();
        x = next;
        if (change < 1e-9 && step > 10) break;
    }
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd f0 = rhs(x);
        if (f0.cwiseAbs().maxCoeff() < 1e-15) break;
        Eigen::MatrixXd J(static_cast<long>(3 * n), static_cast<long>(3 * n));
        for (long c = 0; c < static_cast<long>(3 * n); ++c) {
            const double h = 1e-7;
            Eigen::VectorXd xp = x, xm = x;
            xp(c) += h;
            xm(c) -= h;
            J.col(c) = (rhs(xp) - rhs(xm)) / (2.0 * h);
        }
        const Eigen::VectorXd dx = J.fullPivLu().solve(-f0);
        x += dx;
        if (dx.cwiseAbs().maxCoeff() < 1e-15) break;
    }
    if (!(rhs(x).cwiseAbs().maxCoeff() < 1e-10))
        throw NonConvergence("coupled steady-state root finding failed", rhs(x).cwiseAbs().maxCoeff(), 50, {});

    cplx t = std::polar(1.0, last), r{0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
        t += radiated(x, k) * std::polar(1.0, last - sc[k].position);
        r += radiated(x, k) * std::polar(1.0, sc[k].position);
    }
    return {t, r};
}

/// int f(delta - s) N(s; 0, sigma) ds by the trapezoid rule on +-range*sigma.
inline double trapezoid_convolve(const std::function<double(double)>& f, double delta, double sigma,
                                 std::size_t points = 100000, double range = 8.0) {
    if (sigma == 0.0) return f(delta);
    const double a = -range * sigma;
    const double h = 2.0 * range * sigma / static_cast<double>(points - 1);
    const double norm = 1.0 / (sigma * std::sqrt(two_pi));
    double acc = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double s = a + h * static_cast<double>(i);
        const double w = (i == 0 || i + 1 == points) ? 0.5 : 1.0;
        acc += w * f(delta - s) * norm * std::exp(-0.5 * s * s / (sigma * sigma));
    }
    return acc * h;
}

struct CheckResult {
    std::string name;
    double deviation = 0.0;
    double threshold = 0.0;
    bool passed() const { return deviation <= threshold; }
};

/// Closed-form Bloch steady state against time integration on randomised
/// (delta, omega, gamma, gamma_d) draws.
inline CheckResult check_bloch(std::uint64_t seed, int draws = 200) {
    double worst = 0.0;
    for (int k = 0; k < draws; ++k) {
        auto eng = keyed_engine(seed, static_cast<std::uint64_t>(k), 11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        EmitterParams em;
        em.nu0 = 326.614;
        em.gamma = 0.05 * std::pow(100.0, u(eng));
        em.gamma_d = em.gamma * u(eng);
        em.beta = 0.5;
        const double omega = 10.0 * em.gamma * u(eng);
        const double delta = em.gamma * (20.0 * u(eng) - 10.0);
        const auto ref = integrate_bloch(delta, omega, em);
        const auto cf = bloch_steady_state(delta, DriveField{em.nu0, omega}, em);
        worst = std::max({worst, std::abs(ref.rho_ee - cf.rho_ee), std::abs(ref.rho_ge - cf.rho_ge)});
    }
    return {"bloch closed form vs ODE integration", worst, 1e-8};
}

/// Coupled-dipole weak response against the transfer-matrix chain.
inline CheckResult check_linear_response(std::uint64_t seed, int draws = 50) {
    double worst = 0.0;
    for (int k = 0; k < draws; ++k) {
        auto eng = keyed_engine(seed, static_cast<std::uint64_t>(k), 12);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        ChainSpec chain;
        for (int e = 0; e < 2; ++e) {
            EmitterParams em;
            em.nu0 = 326.614 + 0.002 * (u(eng) - 0.5);
            em.gamma = 0.5 + 5.0 * u(eng);
            em.beta = u(eng);
            em.gamma_d = 2.0 * u(eng);
            chain.emitters.push_back(em);
        }
        const double phi = k == 0 ? 200.0 * std::numbers::pi / 180.0 : 4.0 * std::numbers::pi * u(eng);
        chain.phases = {PropagationPhase::from_total(phi)};
        const double nu_p = 326.614 + 0.002 * (u(eng) - 0.5);
        const auto tm = chain_scatter(chain, nu_p, DriveField{nu_p, 0.0});
        const auto& e1 = chain.emitters[0];
        const auto& e2 = chain.emitters[1];
        const auto cd = coupled_two_emitter_weak(e1, e2, angular_detuning(nu_p, e1.nu0),
                                                 angular_detuning(nu_p, e2.nu0), phi);
        worst = std::max({worst, std::abs(tm.t - cd.t), std::abs(tm.r - cd.r)});
    }
    return {"coupled-dipole vs transfer matrix (weak drive)", worst, 1e-10};
}

/// Mean-field fixed point against the root-finding steady state for two
/// emitters with beta 0.85 / 0.78 at 200 deg across a power range.
inline CheckResult check_mean_field() {
    ChainSpec chain;
    EmitterParams e1;
    e1.nu0 = 326.614;
    e1.gamma = ghz_to_angular(0.3);
    e1.beta = 0.85;
    e1.gamma_d = ghz_to_angular(0.02);
    EmitterParams e2 = e1;
    e2.beta = 0.78;
    chain.emitters = {e1, e2};
    chain.phases = {PropagationPhase::from_total(200.0 * std::numbers::pi / 180.0)};
    double worst = 0.0;
    for (double rel : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        for (double det : {0.0, 0.5}) {
            const double nu_p = e1.nu0 + angular_to_thz(det * e1.gamma);
            const double omega = rel * e1.gamma;
            const auto sc = build_scatterers(chain, nu_p);
            const auto mf = mean_field_scatter(sc, omega);
            const auto ref = coupled_steady_state(sc, omega);
            worst = std::max({worst, std::abs(mf.amps.t - ref.t), std::abs(mf.amps.r - ref.r)});
        }
    }
    return {"mean-field fixed point vs coupled steady-state roots", worst, 1e-6};
}

/// Gauss-Hermite convolution of a Lorentzian dip (FWHM gamma) at sigma =
/// gamma against the dense trapezoid rule.
inline CheckResult check_diffusion(int nodes = 21) {
    EmitterParams em;
    em.nu0 = 326.614;
    em.gamma = 1.0;
    em.beta = 1e-3;
    auto dip = [&](double d) { return 1.0 - weak_scatter(d, em).transmission(); };
    const auto gh = spectral_diffusion_convolve(dip, em.gamma, nodes);
    double worst = 0.0;
    for (int i = -40; i <= 40; ++i) {
        const double d = 0.1 * i * em.gamma;
        worst = std::max(worst, std::abs(gh(d) - trapezoid_convolve(dip, d, em.gamma)));
    }
    // Relative to the unconvolved peak depth.
    return {"Gauss-Hermite (" + std::to_string(nodes) + " nodes) vs trapezoid convolution",
            worst / dip(0.0), 1e-6};
}

/// Runs all checks, printing one line per check; true iff all pass.
inline bool run_checks(std::ostream& out, std::uint64_t seed, int nodes = 21) {
    const std::vector<CheckResult> checks{check_bloch(seed), check_linear_response(seed), check_mean_field(),
                                          check_diffusion(nodes)};
    bool ok = true;
    for (const auto& c : checks) {
        out << (c.passed() ? "PASS" : "FAIL") << "  " << c.name << ": max deviation " << c.deviation
            << " (threshold " << c.threshold << ")\n";
        ok = ok && c.passed();
    }
    return ok;
}

}  // namespace wqed::oracle
