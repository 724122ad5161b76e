#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace wqed {

struct NelderMeadOptions {
    int max_evals = 4000;
    double xtol = 1e-8;   // simplex size, in the optimiser's coordinates
    double ftol = 1e-10;  // vertex value spread, relative to max(1, |f_best|)
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0.0;
    int evaluations = 0;
    int iterations = 0;
    double simplex_size = 0.0;
    bool converged = false;
};

/// Unconstrained Nelder-Mead with reflection 1, expansion 2, contraction 0.5
/// and shrink 0.5. `steps` gives the initial simplex edge per coordinate.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const std::vector<double>& steps,
                             const NelderMeadOptions& opts = {}) {
    const std::size_t n = x0.size();
    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += steps[i];
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    auto size_of = [&] {
        double d = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t k = 0; k < n; ++k) d = std::max(d, std::abs(pts[i][k] - pts[0][k]));
        return d;
    };
    auto point = [&](const std::vector<double>& c, const std::vector<double>& w, double a) {
        std::vector<double> p(n);
        for (std::size_t k = 0; k < n; ++k) p[k] = c[k] + a * (w[k] - c[k]);
        return p;
    };

    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        {
            std::vector<std::vector<double>> p2(n + 1);
            std::vector<double> f2(n + 1);
            for (std::size_t i = 0; i <= n; ++i) {
                p2[i] = pts[order[i]];
                f2[i] = fv[order[i]];
            }
            pts.swap(p2);
            fv.swap(f2);
        }
        res.simplex_size = size_of();
        const double spread = std::abs(fv[n] - fv[0]);
        if (n == 0 || (res.simplex_size < opts.xtol &&
                       spread <= opts.ftol * std::max(1.0, std::abs(fv[0])))) {
            res.converged = true;
            break;
        }
        if (res.evaluations >= opts.max_evals) break;
        ++res.iterations;

        std::vector<double> c(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) c[k] += pts[i][k] / static_cast<double>(n);

        const auto xr = point(c, pts[n], -1.0);
        const double fr = eval(xr);
        if (fr < fv[0]) {
            const auto xe = point(c, pts[n], -2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[n] = xe;
                fv[n] = fe;
            } else {
                pts[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if (fr < fv[n - 1]) {
            pts[n] = xr;
            fv[n] = fr;
            continue;
        }
        const bool outside = fr < fv[n];
        const auto xc = outside ? point(c, xr, 0.5) : point(c, pts[n], 0.5);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[n])) {
            pts[n] = xc;
            fv[n] = fc;
            continue;
        }
        for (std::size_t i = 1; i <= n; ++i) {
            pts[i] = point(pts[0], pts[i], 0.5);
            fv[i] = eval(pts[i]);
        }
    }
    res.x = pts[0];
    res.f = fv[0];
    return res;
}

}  // namespace wqed
