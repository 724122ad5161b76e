#pragma once

// Dip depth and linewidth extraction from sampled traces.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wqed/errors.hpp"
#include "wqed/trace.hpp"
#include "wqed/units.hpp"

namespace wqed {

namespace detail {
inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
    return 0.5 * (lo + hi);
}
}  // namespace detail

/// Median of the outer 10% of points on each side (at least one per side).
inline double outer_baseline(std::span<const double> y) {
    const std::size_t k = std::max<std::size_t>(1, y.size() / 10);
    std::vector<double> outer(y.begin(), y.begin() + static_cast<long>(k));
    outer.insert(outer.end(), y.end() - static_cast<long>(k), y.end());
    return detail::median(std::move(outer));
}

/// Median attached uncertainty, or a robust estimate from second differences
/// (MAD scaled to a Gaussian sigma) when none is attached.
inline double noise_estimate(std::span<const double> y, std::span<const double> err = {}) {
    if (!err.empty()) return detail::median(std::vector<double>(err.begin(), err.end()));
    if (y.size() < 3) return 0.0;
    std::vector<double> d2;
    d2.reserve(y.size() - 2);
    for (std::size_t i = 1; i + 1 < y.size(); ++i)
        d2.push_back(std::abs(y[i - 1] - 2.0 * y[i] + y[i + 1]));
    return 1.4826 * detail::median(std::move(d2)) / std::sqrt(6.0);
}

struct Extinction {
    double depth = 0.0;     // 1 - min/baseline
    double x_min = 0.0;     // refined location of the minimum, axis units
    double baseline = 0.0;
    double minimum = 0.0;   // refined minimum value
};

inline Extinction extract_extinction(std::span<const double> x, std::span<const double> y,
                                     std::span<const double> err = {}) {
    if (x.size() != y.size()) throw ValidationError("extinction: axis/value size mismatch");
    if (y.size() < 5) throw ValidationError("extinction needs at least 5 points");
    const double baseline = outer_baseline(y);
    const auto it = std::min_element(y.begin(), y.end());
    const std::size_t i = static_cast<std::size_t>(it - y.begin());
    const double ymin = *it;
    const double noise = noise_estimate(y, err);
    if (!(baseline - ymin > 3.0 * noise))
        throw FlatTrace("trace dip is not above 3x the noise estimate");

    Extinction res;
    res.baseline = baseline;
    res.x_min = x[i];
    res.minimum = ymin;
    if (i > 0 && i + 1 < y.size()) {
        // Parabola through the three samples around the minimum.
        const double x0 = x[i - 1] - x[i], x2 = x[i + 1] - x[i];
        const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
        const double s0 = (y0 - y1) / x0, s2 = (y2 - y1) / x2;
        const double a = (s2 - s0) / (x2 - x0);
        if (a > 0.0) {
            const double b = s0 - a * x0;  // slope at the centre sample
            double xv = std::clamp(-b / (2.0 * a), x0, x2);
            double yv = y1 + b * xv + a * xv * xv;
            if (y1 >= 0.0) yv = std::max(yv, 0.0);
            res.x_min = x[i] + xv;
            res.minimum = std::min(yv, y1);
        }
    }
    res.depth = baseline > 0.0 ? std::clamp(1.0 - res.minimum / baseline, 0.0, 1.0) : 0.0;
    return res;
}

inline Extinction extract_extinction(const SpectrumTrace& trace) {
    if (trace.axis2) throw ValidationError("extinction extraction needs a 1D trace");
    return extract_extinction(trace.axis1.values, trace.values, trace.uncertainty);
}

struct HalfWidth {
    double width = 0.0;  // axis units
    double left = 0.0;
    double right = 0.0;
    bool peak = true;
};

/// Width of the contiguous region beyond the half level that contains the
/// dominant extremum. Peaks use half of the maximum (offset-free data); dips
/// use the midpoint between the outer baseline and the minimum. Crossings are
/// linearly interpolated.
inline HalfWidth measure_half_width(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> err = {}) {
    if (x.size() != y.size()) throw ValidationError("fwhm: axis/value size mismatch");
    if (y.size() < 5) throw NoPeak("fwhm needs at least 5 points");
    const double baseline = outer_baseline(y);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    const double up = *hi - baseline;
    const double down = baseline - *lo;
    const bool peak = up >= down;
    const double prominence = peak ? up : down;
    if (!(prominence >= 3.0 * noise_estimate(y, err)) || prominence <= 0.0)
        throw NoPeak("no peak or dip above 3x the noise estimate");

    const std::size_t i0 = static_cast<std::size_t>((peak ? hi : lo) - y.begin());
    const double level = peak ? 0.5 * *hi : 0.5 * (baseline + *lo);
    auto inside = [&](double v) { return peak ? v >= level : v <= level; };
    auto crossing = [&](std::size_t a, std::size_t b) {
        return x[a] + (level - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    };

    std::size_t l = i0;
    while (l > 0 && inside(y[l - 1])) --l;
    if (l == 0) throw NoPeak("half level not crossed on the left flank");
    std::size_t r = i0;
    while (r + 1 < y.size() && inside(y[r + 1])) ++r;
    if (r + 1 == y.size()) throw NoPeak("half level not crossed on the right flank");

    HalfWidth hw;
    hw.peak = peak;
    hw.left = crossing(l - 1, l);
    hw.right = crossing(r, r + 1);
    hw.width = hw.right - hw.left;
    return hw;
}

/// Conversion from an axis column to rad/ns, by its label.
inline double angular_per_axis_unit(const std::string& label) {
    auto ends_with = [&](const char* s) {
        const std::string suf(s);
        return label.size() >= suf.size() &&
               label.compare(label.size() - suf.size(), suf.size(), suf) == 0;
    };
    if (ends_with("_thz")) return two_pi * thz_to_ghz;
    if (ends_with("_ghz")) return two_pi;
    throw ValidationError("axis '" + label + "' is not a frequency axis");
}

/// FWHM of the dominant peak or dip, rad/ns.
inline double extract_fwhm(const SpectrumTrace& trace) {
    if (trace.axis2) throw ValidationError("fwhm extraction needs a 1D trace");
    const double k = angular_per_axis_unit(trace.axis1.label);
    return k * measure_half_width(trace.axis1.values, trace.values, trace.uncertainty).width;
}

}  // namespace wqed
