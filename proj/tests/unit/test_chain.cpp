#include <catch_amalgamated.hpp>

#include <random>

#include "wqed/chain.hpp"
#include "wqed/features.hpp"
#include "wqed/oracle.hpp"

using namespace wqed;
using Catch::Approx;

namespace {
constexpr double phi_200 = 200.0 * std::numbers::pi / 180.0;

EmitterParams make(double beta, double gamma = 1.0, double gamma_d = 0.0, double nu0 = 326.614) {
    EmitterParams em;
    em.nu0 = nu0;
    em.gamma = gamma;
    em.beta = beta;
    em.gamma_d = gamma_d;
    return em;
}

ChainSpec two(const EmitterParams& a, const EmitterParams& b, double phi) {
    ChainSpec c;
    c.emitters = {a, b};
    c.phases = {PropagationPhase::from_total(phi)};
    return c;
}

bool close(cplx a, cplx b, double tol) { return std::abs(a - b) <= tol; }
}  // namespace

TEST_CASE("geometry phase") {
    const auto p = phase_from_geometry(15.7, 2e7, 326.614);
    const double cycles = 326.614e12 * 15.7e-6 / 2e7;
    CHECK(cycles == Approx(256.39).margin(0.01));
    CHECK(p.winding == 256);
    CHECK(p.total() == Approx(two_pi * cycles).epsilon(1e-12));

    // nu d / v = 11 wavelengths
    const auto q = phase_from_geometry(11.0 * 2e7 / 326.614e12 * 1e6, 2e7, 326.614);
    CHECK(q.winding == 11);
    CHECK(q.residual == Approx(0.0).margin(1e-9));
    CHECK(q.total() == Approx(22.0 * std::numbers::pi).epsilon(1e-12));

    CHECK(phase_from_geometry(15.7, 2e7, 0.0).total() == 0.0);
    CHECK_THROWS_AS(phase_from_geometry(0.0, 2e7, 326.614), ValidationError);
    CHECK_THROWS_AS(phase_from_geometry(15.7, -1.0, 326.614), ValidationError);
}

TEST_CASE("transfer matrix construction") {
    const auto id = emitter_transfer_matrix({cplx{1.0, 0.0}, cplx{0.0, 0.0}});
    CHECK(close(id(0, 0), 1.0, 0.0));
    CHECK(close(id(0, 1), 0.0, 0.0));
    CHECK(close(id(1, 0), 0.0, 0.0));
    CHECK(close(id(1, 1), 1.0, 0.0));

    const auto m = emitter_transfer_matrix({cplx{0.5, 0.0}, cplx{-0.5, 0.0}});
    CHECK(close(m(0, 0), 0.0, 1e-15));
    CHECK(close(m(0, 1), -1.0, 1e-15));
    CHECK(close(m(1, 0), 1.0, 1e-15));
    CHECK(close(m(1, 1), 2.0, 1e-15));

    CHECK_THROWS_AS(emitter_transfer_matrix({cplx{0.0, 0.0}, cplx{-1.0, 0.0}}), ValidationError);

    std::mt19937_64 eng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const cplx t{u(eng), u(eng)};
        if (std::abs(t) < 1e-3) continue;
        const ScatterAmplitudes a{t, t - 1.0};
        const auto tm = emitter_transfer_matrix(a);
        CHECK(close(tm.det(), 1.0, 1e-10));
        const auto back = amplitudes_from_transfer(tm);
        CHECK(close(back.t, a.t, 1e-12));
        CHECK(close(back.r, a.r, 1e-12));
    }
}

TEST_CASE("propagation matrix") {
    const auto p0 = propagation_matrix(0.0);
    CHECK(close(p0(0, 0), 1.0, 0.0));
    CHECK(close(p0(1, 1), 1.0, 0.0));
    const auto pp = propagation_matrix(std::numbers::pi);
    CHECK(close(pp(0, 0), -1.0, 1e-15));
    CHECK(close(pp(1, 1), -1.0, 1e-15));
    const auto pf = propagation_matrix(phi_200);
    CHECK(close(pf(0, 0), std::polar(1.0, phi_200), 1e-15));
    CHECK(close(pf(1, 1), std::polar(1.0, -phi_200), 1e-15));
}

TEST_CASE("chain of one emitter equals the single scatterer") {
    ChainSpec c;
    c.emitters = {make(0.7, 1.2, 0.1)};
    for (double w : {0.0, 0.5, 3.0}) {
        const double nu = 326.614 + 0.0001;
        const auto a = chain_scatter(c, nu, DriveField{nu, w});
        const auto b = single_scatter(angular_detuning(nu, 326.614), DriveField{nu, w}, c.emitters[0]);
        CHECK(close(a.t, b.t, 1e-14));
        CHECK(close(a.r, b.r, 1e-14));
    }
}

TEST_CASE("uncoupled emitters in a chain are transparent") {
    const auto c = two(make(0.0), make(0.0), 1.234);
    const auto a = chain_scatter(c, 326.614, DriveField{326.614, 0.0});
    CHECK(a.transmission() == Approx(1.0).margin(1e-14));
    CHECK(close(a.t, std::polar(1.0, 1.234), 1e-14));
}

TEST_CASE("coupled-dipole solution equals the transfer-matrix chain at weak drive") {
    std::mt19937_64 eng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        const auto e1 = make(u(eng), 0.3 + 4.0 * u(eng), u(eng), 326.614 + 0.001 * (u(eng) - 0.5));
        const auto e2 = make(u(eng), 0.3 + 4.0 * u(eng), u(eng), 326.614 + 0.001 * (u(eng) - 0.5));
        const double phi = k == 0 ? phi_200 : 6.0 * u(eng);
        const double nu = 326.614 + 0.001 * (u(eng) - 0.5);
        const auto tm = chain_scatter(two(e1, e2, phi), nu, DriveField{nu, 0.0});
        const auto cd = coupled_two_emitter_weak(e1, e2, angular_detuning(nu, e1.nu0),
                                                 angular_detuning(nu, e2.nu0), phi);
        CHECK(close(tm.t, cd.t, 1e-10));
        CHECK(close(tm.r, cd.r, 1e-10));
    }
}

TEST_CASE("coupled-dipole special cases") {
    const auto e1 = make(0.85, 1.0, 0.1);
    const auto a = coupled_two_emitter_weak(e1, make(0.0), 0.3, -0.2, 0.7);
    const auto s = weak_scatter(0.3, e1);
    CHECK(std::norm(a.t) == Approx(s.transmission()).epsilon(1e-12));
    CHECK(std::norm(a.r) == Approx(s.reflection()).epsilon(1e-12));
}

TEST_CASE("three-emitter composition is associative") {
    const auto e1 = make(0.6, 1.0, 0.1, 326.614);
    const auto e2 = make(0.7, 1.3, 0.0, 326.6141);
    const auto e3 = make(0.5, 0.8, 0.2, 326.6139);
    const double nu = 326.61405;
    const auto m = [&](const EmitterParams& e) {
        return emitter_transfer_matrix(weak_scatter(angular_detuning(nu, e.nu0), e));
    };
    const auto p1 = propagation_matrix(0.9), p2 = propagation_matrix(2.1);
    const auto left = m(e3) * (p2 * (m(e2) * (p1 * m(e1))));
    const auto right = ((m(e3) * p2) * m(e2)) * (p1 * m(e1));
    ChainSpec c;
    c.emitters = {e1, e2, e3};
    c.phases = {PropagationPhase::from_total(0.9), PropagationPhase::from_total(2.1)};
    const auto full = chain_scatter(c, nu, DriveField{nu, 0.0});
    const auto a = amplitudes_from_transfer(left), b = amplitudes_from_transfer(right);
    CHECK(close(a.t, b.t, 1e-12));
    CHECK(close(a.r, b.r, 1e-12));
    CHECK(close(full.t, a.t, 1e-12));
    CHECK(close(full.r, a.r, 1e-12));
}

TEST_CASE("global phase and 2 pi periodicity") {
    const auto e1 = make(0.85, 1.0, 0.1), e2 = make(0.78, 1.0, 0.1, 326.6140005);
    const double nu = 326.6140002;
    for (double phi : {0.0, 0.5, phi_200}) {
        const auto a = chain_scatter(two(e1, e2, phi), nu, DriveField{nu, 0.0});
        const auto b = chain_scatter(two(e1, e2, phi + two_pi), nu, DriveField{nu, 0.0});
        CHECK(a.transmission() == Approx(b.transmission()).margin(1e-12));
        CHECK(a.reflection() == Approx(b.reflection()).margin(1e-12));
        for (double w : {0.3, 2.0}) {
            const auto c = coupled_two_emitter_saturating(two(e1, e2, phi), nu, DriveField{nu, w});
            const auto d = coupled_two_emitter_saturating(two(e1, e2, phi + two_pi), nu, DriveField{nu, w});
            CHECK(c.transmission() == Approx(d.transmission()).margin(1e-9));
        }
    }
    // A constant added to every scatterer position.
    auto sc = build_scatterers(two(e1, e2, 0.8), nu);
    const auto base = transfer_scatter(sc, 0.0);
    for (auto& s : sc) s.position += 1.7;
    const auto shifted = transfer_scatter(sc, 0.0);
    CHECK(std::abs(base.t) == Approx(std::abs(shifted.t)).margin(1e-12));
    CHECK(std::abs(base.r) == Approx(std::abs(shifted.r)).margin(1e-12));
}

TEST_CASE("two identical emitters in phase broaden the dip") {
    const auto em = make(0.85, 1.0);
    auto fwhm = [&](bool pair) {
        std::vector<double> x, y;
        for (int i = -3000; i <= 3000; ++i) {
            const double d = 0.002 * i;
            const double nu = em.nu0 + angular_to_thz(d);
            const double t2 = pair ? chain_scatter(two(em, em, 0.0), nu, DriveField{nu, 0.0}).transmission()
                                   : weak_scatter(d, em).transmission();
            x.push_back(d);
            y.push_back(1.0 - t2);
        }
        return measure_half_width(x, y).width;
    };
    CHECK(fwhm(true) > 1.5 * fwhm(false));

    // r(-d) = conj(r(d)), so the pair is symmetric whenever exp(2i phi) is real.
    const double d = 0.4;
    auto asym = [&](double phi) {
        const auto c = two(em, em, phi);
        const double plus = chain_scatter(c, em.nu0 + angular_to_thz(d), {}).transmission();
        const double minus = chain_scatter(c, em.nu0 - angular_to_thz(d), {}).transmission();
        return std::abs(plus - minus);
    };
    CHECK(asym(0.5 * std::numbers::pi) < 1e-9);
    CHECK(asym(0.25 * std::numbers::pi) > 1e-3);
}

TEST_CASE("mean-field model limits") {
    const auto e1 = make(0.85, 1.0, 0.05), e2 = make(0.78, 1.0, 0.05);
    const auto c = two(e1, e2, phi_200);
    for (double det : {0.0, 0.3, -0.7}) {
        const double nu = e1.nu0 + angular_to_thz(det);
        const auto weak = coupled_two_emitter_weak(e1, e2, det, det, phi_200);
        const auto mf = coupled_two_emitter_saturating(c, nu, DriveField{nu, 1e-6});
        CHECK(close(mf.t, weak.t, 1e-6));
    }
    const auto strong = coupled_two_emitter_saturating(c, e1.nu0, DriveField{e1.nu0, 1e4});
    CHECK(1.0 - strong.transmission() < 1e-3);
    CHECK(close(strong.t, std::polar(1.0, phi_200), 1e-2));
}

TEST_CASE("mean-field model matches the root-finding steady state") {
    const auto e1 = make(0.85, 1.0, 0.05), e2 = make(0.78, 1.0, 0.05);
    const auto c = two(e1, e2, phi_200);
    for (double w : {0.3, 1.0, 3.0}) {
        const auto sc = build_scatterers(c, e1.nu0);
        const auto mf = mean_field_scatter(sc, w);
        const auto ref = oracle::coupled_steady_state(sc, w);
        CHECK(close(mf.amps.t, ref.t, 1e-6));
        CHECK(close(mf.amps.r, ref.r, 1e-6));
    }
}

TEST_CASE("mean-field non-convergence carries the last iterate") {
    const auto e1 = make(0.85, 1.0, 0.05), e2 = make(0.78, 1.0, 0.05);
    const auto sc = build_scatterers(two(e1, e2, phi_200), e1.nu0);
    MeanFieldOptions opts;
    opts.max_iter = 2;
    try {
        mean_field_scatter(sc, 1.0, opts);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(e.iterations() == 2);
        CHECK(e.last_iterate().size() == 2);
        CHECK(e.residual() > 0.0);
    }
}

TEST_CASE("uncoupled model") {
    const auto e1 = make(0.85), e2 = make(0.78);
    const auto u = uncoupled_two_emitter(two(e1, e2, phi_200), e1.nu0, DriveField{e1.nu0, 0.0});
    CHECK(u.transmission() == Approx(std::pow(0.15 * 0.22, 2)).epsilon(1e-10));
    const auto lone = uncoupled_two_emitter(two(e1, make(0.0), phi_200), e1.nu0, DriveField{e1.nu0, 0.4});
    CHECK(lone.transmission() == Approx(single_scatter(0.0, {0.0, 0.4}, e1).transmission()).epsilon(1e-12));
}

TEST_CASE("uncoupled extinction exceeds coupled extinction at 200 degrees in the weak-drive regime") {
    const auto e1 = make(0.85, 1.0, 0.05), e2 = make(0.78, 1.0, 0.05);
    const auto c = two(e1, e2, phi_200);
    for (int k = 0; k < 20; ++k) {
        const double w = 0.005 * std::pow(10.0, 0.08 * k);
        const double unc = 1.0 - uncoupled_two_emitter(c, e1.nu0, {0.0, w}).transmission();
        const double cpl = 1.0 - coupled_two_emitter_saturating(c, e1.nu0, {0.0, w}).transmission();
        CHECK(unc >= cpl);
    }
}

TEST_CASE("rf1 spectrum") {
    auto src = make(0.85, 1.0, 0.2);
    auto filt = make(0.78, 1.0, 0.0);
    const DriveField drive{0.0, 0.6};
    const double far = ghz_to_angular(50.0);
    // Far detuned filter: plain power-broadened line.
    const double nu_src = filt.nu0 + angular_to_thz(far);
    for (double d : {0.0, 0.5, -1.2}) {
        const double nu_p = nu_src + angular_to_thz(d);
        const double i = rf1_spectrum(src, filt, nu_p, drive, far, 1000.0, 5.0);
        // Residual filter dip in the far tail is of order beta*gamma*gamma2/detuning^2.
        CHECK(i == Approx(1000.0 * source_lorentzian(d, 0.6, src) + 5.0).epsilon(1e-5));
    }
    // Co-resonant, weak drive: dip factor |t2(0)|^2.
    const double i0 = rf1_spectrum(src, filt, filt.nu0, DriveField{0.0, 0.0}, 0.0, 1.0, 0.0);
    CHECK(i0 == Approx(0.0484).epsilon(1e-10));
}

TEST_CASE("rf2 spectrum symmetry and Fano asymmetry") {
    const auto src = make(0.78, 1.0, 0.1);
    const auto mir = make(0.85, 1.0, 0.1);
    const DriveField drive{0.0, 0.3};
    const double g2 = src.coherence_decay();
    auto cut = [&](double phi, double d) {
        return rf2_spectrum(src, mir, src.nu0 + angular_to_thz(d), drive, 0.0, phi, 1.0, 0.0);
    };
    std::mt19937_64 eng(9);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int k = 0; k < 20; ++k) {
        const double d = u(eng);
        CHECK(std::abs(cut(0.5 * std::numbers::pi, d) - cut(0.5 * std::numbers::pi, -d)) <= 1e-12);
    }
    const double p = cut(phi_200, g2), m = cut(phi_200, -g2);
    CHECK(std::abs(p - m) / std::max(p, m) > 0.05);

    // No mirror coupling: detuned RF line.
    const double i = rf2_spectrum(src, make(0.0), src.nu0 + angular_to_thz(0.3), drive, 0.0, phi_200, 2.0, 0.0);
    // The detuning passes through a THz round trip, which costs about ten digits.
    CHECK(i == Approx(2.0 * source_lorentzian(0.3, 0.3, src)).epsilon(1e-9));
}
