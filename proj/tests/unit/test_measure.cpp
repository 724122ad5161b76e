#include <catch_amalgamated.hpp>

#include <numeric>

#include "wqed/detector.hpp"
#include "wqed/features.hpp"
#include "wqed/oracle.hpp"
#include "wqed/parallel.hpp"
#include "wqed/quadrature.hpp"

using namespace wqed;
using Catch::Approx;

namespace {
EmitterParams dip_emitter(double beta = 0.85, double gamma = 1.0) {
    EmitterParams em;
    em.nu0 = 326.614;
    em.gamma = gamma;
    em.beta = beta;
    return em;
}

SpectrumTrace sampled(const std::function<double(double)>& f, double lo, double hi, int n,
                      const char* label = "freq_ghz") {
    SpectrumTrace tr;
    tr.axis1.label = label;
    for (int i = 0; i < n; ++i) {
        const double x = lo + (hi - lo) * i / (n - 1);
        tr.axis1.values.push_back(x);
        tr.values.push_back(f(x));
    }
    tr.value_label = "value";
    return tr;
}
}  // namespace

TEST_CASE("Gauss-Hermite rule integrates Gaussian moments") {
    for (int n : {3, 5, 21, 41}) {
        const auto& r = gauss_hermite_rule(n);
        REQUIRE(r.nodes.size() == static_cast<std::size_t>(n));
        double m0 = 0, m2 = 0, m4 = 0, m1 = 0;
        for (int k = 0; k < n; ++k) {
            const double x = r.nodes[k], w = r.weights[k];
            m0 += w;
            m1 += w * x;
            m2 += w * x * x;
            m4 += w * x * x * x * x;
        }
        CHECK(m0 == Approx(1.0).epsilon(1e-14));
        CHECK(std::abs(m1) < 1e-14);
        CHECK(m2 == Approx(1.0).epsilon(1e-12));
        if (n >= 3) CHECK(m4 == Approx(3.0).epsilon(1e-11));
    }
    CHECK_THROWS_AS(gauss_hermite_rule(4), ValidationError);
    CHECK_THROWS_AS(gauss_hermite_rule(1), ValidationError);
}

TEST_CASE("convolution identity and normalisation") {
    auto f = [](double x) { return 1.0 / (1.0 + x * x); };
    const auto same = spectral_diffusion_convolve(f, 0.0);
    for (double x : {-2.0, 0.0, 0.7}) CHECK(same(x) == f(x));
    const auto c = spectral_diffusion_convolve([](double) { return 3.5; }, 2.0);
    for (double x : {-2.0, 0.0, 0.7}) CHECK(c(x) == Approx(3.5).epsilon(1e-14));
    CHECK_THROWS_AS(spectral_diffusion_convolve(f, 1.0, 20), ValidationError);
    CHECK_THROWS_AS(spectral_diffusion_convolve(f, -1.0), ValidationError);
}

TEST_CASE("convolution is linear") {
    auto f1 = [](double x) { return 1.0 / (1.0 + x * x); };
    auto f2 = [](double x) { return std::exp(-x * x); };
    auto mix = [&](double x) { return 2.0 * f1(x) - 0.7 * f2(x); };
    const auto c1 = spectral_diffusion_convolve(f1, 0.8);
    const auto c2 = spectral_diffusion_convolve(f2, 0.8);
    const auto cm = spectral_diffusion_convolve(mix, 0.8);
    for (double x : {-1.5, 0.0, 0.3, 2.0}) CHECK(std::abs(cm(x) - (2.0 * c1(x) - 0.7 * c2(x))) < 1e-12);
}

TEST_CASE("convolution of a Gaussian is exact to quadrature accuracy") {
    // N(0, a^2) * N(0, s^2) = N(0, a^2 + s^2).
    const double a = 1.0, s = 0.6;
    auto g = [&](double x) { return std::exp(-0.5 * x * x / (a * a)) / (a * std::sqrt(two_pi)); };
    const auto c = spectral_diffusion_convolve(g, s);
    const double v = a * a + s * s;
    for (double x : {0.0, 0.5, 1.7}) {
        const double exact = std::exp(-0.5 * x * x / v) / std::sqrt(two_pi * v);
        CHECK(c(x) == Approx(exact).epsilon(1e-9));
        CHECK(oracle::trapezoid_convolve(g, x, s) == Approx(exact).epsilon(1e-9));
    }
}

TEST_CASE("diffusion weakens the dip and broadens it") {
    const auto em = dip_emitter(0.85);
    auto t2 = [&](double d) { return weak_scatter(d, em).transmission(); };
    double prev_depth = 2.0, prev_width = 0.0;
    for (double sigma : {0.0, 0.2, 0.5, 1.0, 2.0}) {
        const auto c = spectral_diffusion_convolve(t2, sigma);
        const auto tr = sampled(c, -25.0, 25.0, 2001);
        const double depth = extract_extinction(tr).depth;
        const double width = measure_half_width(tr.axis1.values, tr.values).width;
        CHECK(depth <= prev_depth);
        CHECK(width >= prev_width);
        prev_depth = depth;
        prev_width = width;
    }
}

TEST_CASE("tensor-product diffusion average reduces to the one-dimensional rule") {
    auto f = [](std::span<const double> s) { return 1.0 / (1.0 + s[0] * s[0]); };
    const std::vector<double> sig{0.7, 0.0};
    const double a = diffusion_average(sig, 21, f);
    const auto c = spectral_diffusion_convolve([](double x) { return 1.0 / (1.0 + x * x); }, 0.7);
    CHECK(a == Approx(c(0.0)).epsilon(1e-14));
    const std::vector<double> both{0.5, 0.5};
    CHECK(diffusion_average(both, 5, [](std::span<const double>) { return 2.0; }) == Approx(2.0).epsilon(1e-14));
}

TEST_CASE("simulated counts") {
    SpectrumTrace zero = sampled([](double) { return 0.0; }, 0.0, 1.0, 10);
    const auto z = simulate_counts(zero, DetectorModel{0.0, 1.0, 1});
    for (double v : z.values) CHECK(v == 0.0);

    SpectrumTrace big = sampled([](double) { return 1e6; }, 0.0, 1.0, 100);
    const auto c = simulate_counts(big, DetectorModel{0.0, 1.0, 7});
    const double mean = std::accumulate(c.values.begin(), c.values.end(), 0.0) / 100.0;
    CHECK(std::abs(mean - 1e6) < 5.0 * std::sqrt(1e6 / 100.0));
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        CHECK(c.values[i] == std::floor(c.values[i]));
        CHECK(c.uncertainty[i] == std::sqrt(c.values[i]));
    }
    const auto again = simulate_counts(big, DetectorModel{0.0, 1.0, 7});
    CHECK(again.values == c.values);
    const auto other = simulate_counts(big, DetectorModel{0.0, 1.0, 8});
    CHECK(other.values != c.values);

    // Relative error shrinks with the rate.
    double prev = 1.0;
    for (double rate : {1e2, 1e4, 1e6}) {
        SpectrumTrace r = sampled([&](double) { return rate; }, 0.0, 1.0, 200);
        const auto s = simulate_counts(r, DetectorModel{0.0, 1.0, 3});
        double err = 0.0;
        for (double v : s.values) err += std::abs(v - rate) / rate;
        err /= 200.0;
        CHECK(err < prev);
        prev = err;
    }

    SpectrumTrace neg = sampled([](double) { return -1.0; }, 0.0, 1.0, 3);
    CHECK_THROWS_AS(simulate_counts(neg, DetectorModel{}), ValidationError);
    CHECK_THROWS_AS(simulate_counts(zero, DetectorModel{0.0, 0.0, 1}), ValidationError);
}

TEST_CASE("counts do not depend on the thread count") {
    SpectrumTrace r = sampled([](double x) { return 1e3 * (1.0 + x); }, 0.0, 1.0, 257);
    const auto a = simulate_counts(r, DetectorModel{10.0, 0.5, 99});
    std::vector<double> b(r.values.size());
    parallel_for(
        b.size(),
        [&](std::size_t i) {
            SpectrumTrace one;
            one.values = {r.values[i]};
            auto eng = keyed_engine(99, i);
            std::poisson_distribution<long long> d((r.values[i] + 10.0) * 0.5);
            b[i] = static_cast<double>(d(eng));
        },
        4);
    CHECK(a.values == b);
}

TEST_CASE("extinction extraction") {
    const auto em = dip_emitter(0.85);
    auto t2 = [&](double d) { return weak_scatter(d, em).transmission(); };
    const auto tr = sampled(t2, -6.0, 6.0, 201);
    const auto e = extract_extinction(tr);
    CHECK(e.depth == Approx(0.9775).margin(2e-3));
    CHECK(std::abs(e.x_min) < 1e-9);

    // Odd sampling that misses the centre is refined by the parabola.
    const auto off = sampled(t2, -6.03, 6.0, 200);
    const auto eo = extract_extinction(off);
    CHECK(std::abs(eo.x_min) < 0.01);
    CHECK(eo.minimum == Approx(0.0225).margin(2e-3));

    // Scale invariance.
    SpectrumTrace scaled = tr;
    for (double& v : scaled.values) v *= 37.0;
    CHECK(extract_extinction(scaled).depth == Approx(e.depth).epsilon(1e-12));

    const auto flat = sampled([](double) { return 1.0; }, -1.0, 1.0, 50);
    CHECK_THROWS_AS(extract_extinction(flat), FlatTrace);
    CHECK_THROWS_AS(extract_extinction(sampled(t2, -1.0, 1.0, 4)), ValidationError);
}

TEST_CASE("linewidth extraction") {
    const double fwhm = 0.49;
    auto lor = [&](double x) { return 1.0 / (1.0 + 4.0 * x * x / (fwhm * fwhm)); };
    const auto tr = sampled(lor, -5.0 * fwhm, 5.0 * fwhm, 201);
    CHECK(angular_to_ghz(extract_fwhm(tr)) == Approx(fwhm).epsilon(5e-3));

    const double sigma = 0.8;
    auto gau = [&](double x) { return std::exp(-0.5 * x * x / (sigma * sigma)); };
    const auto g = sampled(gau, -6.0, 6.0, 301);
    CHECK(measure_half_width(g.axis1.values, g.values).width ==
          Approx(gaussian_fwhm_per_sigma * sigma).epsilon(5e-3));

    // Vertical scaling.
    SpectrumTrace s = tr;
    for (double& v : s.values) v *= 12.0;
    CHECK(extract_fwhm(s) == Approx(extract_fwhm(tr)).epsilon(1e-12));

    // A large constant offset leaves no prominent feature.
    SpectrumTrace o = tr;
    for (double& v : o.values) v += 1e6;
    o.uncertainty.assign(o.values.size(), 1.0);
    CHECK_THROWS_AS(extract_fwhm(o), NoPeak);

    // Dominant peak of two well separated peaks of unequal height.
    auto pair = [&](double x) { return lor(x + 2.0) + 0.6 * lor(x - 2.0); };
    const auto p = sampled(pair, -6.0, 6.0, 1201);
    const auto hw = measure_half_width(p.axis1.values, p.values);
    CHECK(hw.left < -2.0);
    CHECK(hw.right > -2.0);
    CHECK(hw.width == Approx(fwhm).epsilon(0.02));

    // Two peaks merged above half height are measured as one feature.
    auto merged = [&](double x) { return lor(x + 0.1) + lor(x - 0.1); };
    const auto m = sampled(merged, -5.0, 5.0, 1001);
    CHECK(measure_half_width(m.axis1.values, m.values).width > fwhm);

    // Feature running off the grid.
    const auto edge = sampled(lor, 0.0, 3.0, 101);
    CHECK_THROWS_AS(measure_half_width(edge.axis1.values, edge.values), NoPeak);

    // Dips are measured between the baseline and the minimum.
    auto dip = [&](double x) { return 1.0 - 0.5 * lor(x); };
    const auto d = sampled(dip, -5.0, 5.0, 1001);
    const auto hd = measure_half_width(d.axis1.values, d.values);
    CHECK_FALSE(hd.peak);
    CHECK(hd.width == Approx(fwhm).epsilon(0.01));
}
