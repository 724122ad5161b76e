#pragma once

// Photon-counting detector: Poisson counts with dark counts, drawn from a
// generator keyed by (seed, point index) so any evaluation order gives the
// same numbers.

#include <cmath>
#include <cstdint>
#include <random>

#include "wqed/errors.hpp"
#include "wqed/format.hpp"
#include "wqed/trace.hpp"

namespace wqed {

struct DetectorModel {
    double dark_rate = 0.0;         // counts/s
    double integration_time = 1.0;  // s
    std::uint64_t seed = 0;

    void validate() const {
        if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate))
            throw ValidationError("detector dark_rate must be >= 0");
        if (!(integration_time > 0.0) || !std::isfinite(integration_time))
            throw ValidationError("detector integration_time must be > 0");
    }
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Independent engine for one (seed, stream, index) key.
inline std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t index,
                                    std::uint64_t stream = 0) {
    const std::uint64_t key =
        detail::splitmix64(detail::splitmix64(seed ^ detail::splitmix64(stream)) + index);
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    return std::mt19937_64(seq);
}

/// Trace of expected rates (counts/s) -> integer counts over the integration
/// time, uncertainty sqrt(counts).
inline SpectrumTrace simulate_counts(const SpectrumTrace& rates, const DetectorModel& det) {
    det.validate();
    SpectrumTrace out = rates;
    out.value_label = "counts";
    out.uncertainty.assign(rates.values.size(), 0.0);
    for (std::size_t i = 0; i < rates.values.size(); ++i) {
        const double rate = rates.values[i];
        if (rate < 0.0) throw ValidationError("count rates must be >= 0");
        const double mean = (rate + det.dark_rate) * det.integration_time;
        double counts = 0.0;
        if (mean > 0.0) {
            auto eng = keyed_engine(det.seed, i);
            std::poisson_distribution<long long> dist(mean);
            counts = static_cast<double>(dist(eng));
        }
        out.values[i] = counts;
        out.uncertainty[i] = std::sqrt(counts);
    }
    out.meta["detector.dark_rate"] = format_double(det.dark_rate);
    out.meta["detector.integration_time"] = format_double(det.integration_time);
    out.meta["detector.seed"] = std::to_string(det.seed);
    return out;
}

/// Additive Gaussian noise of fixed standard deviation; attaches it as the
/// per-point uncertainty.
inline SpectrumTrace add_gaussian_noise(const SpectrumTrace& trace, double sigma,
                                        std::uint64_t seed) {
    if (!(sigma > 0.0)) throw ValidationError("noise sigma must be > 0");
    SpectrumTrace out = trace;
    out.uncertainty.assign(trace.values.size(), sigma);
    for (std::size_t i = 0; i < trace.values.size(); ++i) {
        auto eng = keyed_engine(seed, i, 1);
        std::normal_distribution<double> dist(0.0, sigma);
        out.values[i] += dist(eng);
    }
    return out;
}

}  // namespace wqed
