#pragma once

// The scan generators: resonant-transmission scans, saturation sweeps,
// voltage maps and the two resonance-fluorescence maps.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wqed/chain.hpp"
#include "wqed/config.hpp"
#include "wqed/detector.hpp"
#include "wqed/emitter.hpp"
#include "wqed/features.hpp"
#include "wqed/parallel.hpp"
#include "wqed/quadrature.hpp"
#include "wqed/scan_config.hpp"
#include "wqed/trace.hpp"

namespace wqed {

inline constexpr const char* tool_version = "1.0.0";

namespace detail {
inline std::vector<double> diffusion_sigmas(const ScanConfig& cfg,
                                            const std::vector<EmitterParams>& ems) {
    std::vector<double> s(ems.size(), 0.0);
    if (cfg.diffusion)
        for (std::size_t i = 0; i < ems.size(); ++i) s[i] = ems[i].sigma_sd;
    return s;
}
}  // namespace detail

/// Detected transmission of the configured chain at one probe frequency and
/// drive, for fixed per-emitter resonance shifts.
inline double rt_signal(const ScanConfig& cfg, const ChainSpec& chain, double nu_p, double omega,
                        std::span<const double> shifts = {}) {
    const auto sc = build_scatterers(chain, nu_p, shifts);
    const bool total = cfg.detection == Detection::total;
    if (cfg.model == CouplingModel::uncoupled) {
        double v = product_scatter(sc, omega).transmission();
        if (total)
            for (const auto& s : sc)
                v += incoherent_forward_fraction(s.delta, omega, omega, s.em, cfg.mapping);
        return v;
    }
    if (omega == 0.0) return transfer_scatter(sc, 0.0).transmission();
    const auto sol = mean_field_scatter(sc, omega, cfg.mean_field);
    double v = sol.amps.transmission();
    if (total)
        for (std::size_t j = 0; j < sc.size(); ++j)
            v += incoherent_forward_fraction(sc[j].delta, omega * std::abs(sol.local_field[j]), omega,
                                             sc[j].em, cfg.mapping);
    return v;
}

/// rt_signal averaged over each emitter's spectral diffusion when enabled.
inline double observed_rt_signal(const ScanConfig& cfg, const ChainSpec& chain, double nu_p,
                                 double omega) {
    const auto sigmas = detail::diffusion_sigmas(cfg, chain.emitters);
    return diffusion_average(sigmas, cfg.diffusion_nodes, [&](std::span<const double> shifts) {
        return rt_signal(cfg, chain, nu_p, omega, shifts);
    });
}

/// Frequency grid (THz) for a scan at drive omega: the configured grid, or
/// auto_points covering every transition +- span_linewidths linewidths.
inline std::vector<double> frequency_grid(const ScanConfig& cfg, const ChainSpec& chain,
                                          double omega) {
    if (!cfg.frequency.empty()) return cfg.frequency.values();
    double lo = 0.0, hi = 0.0, width = 0.0;
    bool first = true;
    for (const auto& em : chain.emitters) {
        const double sd = cfg.diffusion ? gaussian_fwhm_per_sigma * em.sigma_sd : 0.0;
        const double w = std::hypot(power_broadened_fwhm(em, omega), sd);
        width = std::max(width, w);
        for (const auto& tr : dipole_transitions(em)) {
            lo = first ? tr.nu0 : std::min(lo, tr.nu0);
            hi = first ? tr.nu0 : std::max(hi, tr.nu0);
            first = false;
        }
    }
    if (cfg.center) {
        const double half = std::max(*cfg.center - lo, hi - *cfg.center);
        lo = *cfg.center - half;
        hi = *cfg.center + half;
    }
    const double pad = angular_to_thz(cfg.span_linewidths * width);
    Grid g;
    g.start = lo - pad;
    g.stop = hi + pad;
    g.points = cfg.auto_points;
    return g.values();
}

namespace detail {
inline SpectrumTrace rt_trace(const ScanConfig& cfg, unsigned threads) {
    const ChainSpec chain = cfg.chain();
    SpectrumTrace tr;
    tr.kind = std::string(to_string(cfg.kind));
    tr.axis1 = {"freq_thz", frequency_grid(cfg, chain, cfg.omega)};
    tr.value_label = "transmission";
    tr.values.resize(tr.axis1.values.size());
    parallel_for(
        tr.values.size(),
        [&](std::size_t i) { tr.values[i] = observed_rt_signal(cfg, chain, tr.axis1.values[i], cfg.omega); },
        threads);
    return tr;
}

/// On-resonance extinction at each grid omega; stderr propagated from
/// simulated counts when the detector is on, otherwise zero.
inline SpectrumTrace saturation_trace(const ScanConfig& cfg, unsigned threads, bool with_counts) {
    const ChainSpec chain = cfg.chain();
    const auto omegas = cfg.omega_grid.values();
    std::vector<std::vector<double>> freqs(omegas.size());
    std::vector<std::size_t> offset(omegas.size() + 1, 0);
    for (std::size_t k = 0; k < omegas.size(); ++k) {
        freqs[k] = frequency_grid(cfg, chain, omegas[k]);
        offset[k + 1] = offset[k] + freqs[k].size();
    }
    std::vector<double> flat(offset.back());
    parallel_for(
        flat.size(),
        [&](std::size_t n) {
            const std::size_t k = static_cast<std::size_t>(
                std::upper_bound(offset.begin(), offset.end(), n) - offset.begin() - 1);
            flat[n] = observed_rt_signal(cfg, chain, freqs[k][n - offset[k]], omegas[k]);
        },
        threads);

    SpectrumTrace tr;
    tr.kind = "saturation";
    tr.axis1.label = "omega_ghz";
    for (double w : omegas) tr.axis1.values.push_back(angular_to_ghz(w));
    tr.value_label = "extinction";
    tr.values.resize(omegas.size());
    tr.uncertainty.assign(omegas.size(), 0.0);

    std::vector<double> err;
    if (with_counts) {
        SpectrumTrace rates;
        rates.values = flat;
        for (double& v : rates.values) v *= cfg.detector.count_rate;
        const auto counts = simulate_counts(
            rates, DetectorModel{cfg.detector.dark_rate, cfg.detector.integration_time, cfg.seed});
        flat = counts.values;
        err = counts.uncertainty;
    }
    for (std::size_t k = 0; k < omegas.size(); ++k) {
        const auto b = static_cast<long>(offset[k]);
        const auto e = static_cast<long>(offset[k + 1]);
        std::span<const double> y(flat.data() + b, static_cast<std::size_t>(e - b));
        std::span<const double> ye;
        if (with_counts) ye = std::span<const double>(err.data() + b, static_cast<std::size_t>(e - b));
        const auto ext = extract_extinction(freqs[k], y, ye);
        tr.values[k] = ext.depth;
        if (with_counts && ext.baseline > 0.0) {
            const std::size_t outer = 2 * std::max<std::size_t>(1, y.size() / 10);
            const double sb = 1.2533 * std::sqrt(ext.baseline / static_cast<double>(outer));
            const double sm = std::sqrt(std::max(ext.minimum, 1.0));
            tr.uncertainty[k] = std::hypot(sm / ext.baseline, ext.minimum * sb / (ext.baseline * ext.baseline));
        }
    }
    return tr;
}

inline SpectrumTrace voltage_map_trace(const ScanConfig& cfg, unsigned threads) {
    const auto volts = cfg.voltage.values();
    // Auto grid: cover every emitter plus the tuned one at both voltage ends.
    std::vector<double> freq;
    if (!cfg.frequency.empty()) {
        freq = cfg.frequency.values();
    } else {
        ChainSpec all;
        all.emitters = cfg.tuned_emitters();
        for (double v : {volts.front(), volts.back()}) {
            EmitterParams em = cfg.emitters[cfg.tuned_emitter];
            em.nu0 = stark_frequency(em, v);
            all.emitters.push_back(em);
        }
        freq = frequency_grid(cfg, all, 0.0);
    }
    std::vector<ChainSpec> chains(volts.size());
    for (std::size_t v = 0; v < volts.size(); ++v) {
        ScanConfig c = cfg;
        c.voltages.resize(c.emitters.size());
        c.voltages[cfg.tuned_emitter] = volts[v];
        chains[v] = c.chain();
    }
    SpectrumTrace tr;
    tr.kind = "voltage_map";
    tr.axis1 = {"freq_thz", freq};
    tr.axis2 = Axis{"voltage_v", volts};
    tr.value_label = "transmission";
    tr.values.resize(freq.size() * volts.size());
    parallel_for(
        tr.values.size(),
        [&](std::size_t n) {
            const std::size_t v = n / freq.size();
            tr.values[n] = observed_rt_signal(cfg, chains[v], freq[n % freq.size()], 0.0);
        },
        threads);
    return tr;
}

inline SpectrumTrace rf_trace(const ScanConfig& cfg, unsigned threads) {
    const auto ems = cfg.tuned_emitters();
    const auto lasers = cfg.laser_detuning.values();
    const auto dets = cfg.emitter_detuning.values();
    const bool rf1 = cfg.kind == ScanKind::rf1;
    // rf1: QD1 is the source filtered by QD2; rf2: QD2 is the source and QD1
    // the mirror. Emitter 2 keeps its resonance; detuning is nu1 - nu2.
    const EmitterParams& e1 = ems[0];
    const EmitterParams& e2 = ems[1];
    const double phi = cfg.phases.empty() ? 0.0 : cfg.phases[0].total();
    const DriveField drive{0.0, cfg.omega};
    const std::vector<double> sigmas = detail::diffusion_sigmas(cfg, ems);

    SpectrumTrace tr;
    tr.kind = std::string(to_string(cfg.kind));
    tr.axis1 = {"laser_detuning_ghz", lasers};
    tr.axis2 = Axis{"emitter_detuning_ghz", dets};
    tr.value_label = "counts_per_s";
    tr.values.resize(lasers.size() * dets.size());
    parallel_for(
        tr.values.size(),
        [&](std::size_t n) {
            const double d12 = ghz_to_angular(dets[n / lasers.size()]);
            const double laser = lasers[n % lasers.size()] / thz_to_ghz;
            tr.values[n] = diffusion_average(sigmas, cfg.diffusion_nodes, [&](std::span<const double> s) {
                if (rf1) {
                    const double nu_p = e2.nu0 + angular_to_thz(d12) + laser;
                    return rf1_spectrum(e1, e2, nu_p, drive, d12, cfg.amplitude, cfg.background, s[0], s[1]);
                }
                const double nu_p = e2.nu0 + laser;
                return rf2_spectrum(e2, e1, nu_p, drive, d12, phi, cfg.amplitude, cfg.background, s[1], s[0]);
            });
        },
        threads);
    return tr;
}
}  // namespace detail

/// Meta block: the canonical configuration under a "cfg." prefix plus its hash.
inline Meta config_meta(const ScanConfig& cfg) {
    Meta m;
    const auto kv = to_keyvalues(cfg);
    for (const auto& [k, v] : kv) m["cfg." + k] = v;
    m["config_hash"] = config_hash(kv);
    m["tool_version"] = tool_version;
    return m;
}

/// Reconstructs the ScanConfig recorded in a trace's meta block.
inline ScanConfig config_from_meta(const Meta& meta) {
    KeyValues kv;
    for (const auto& [k, v] : meta)
        if (k.rfind("cfg.", 0) == 0) kv[k.substr(4)] = v;
    if (kv.empty()) throw ValidationError("trace carries no configuration metadata");
    return scan_config_from(kv);
}

/// Noise-free expected values of the configured scan: intensities, or
/// expected counts ((rate + dark) * t) when the detector is enabled.
inline SpectrumTrace model_trace(const ScanConfig& cfg, unsigned threads = thread_count()) {
    cfg.validate();
    SpectrumTrace tr;
    switch (cfg.kind) {
        case ScanKind::rt_scan:
        case ScanKind::joint_rt: tr = detail::rt_trace(cfg, threads); break;
        case ScanKind::saturation: return detail::saturation_trace(cfg, threads, false);
        case ScanKind::voltage_map: tr = detail::voltage_map_trace(cfg, threads); break;
        case ScanKind::rf1:
        case ScanKind::rf2: tr = detail::rf_trace(cfg, threads); break;
    }
    if (cfg.detector.enabled) {
        const double scale = cfg.kind == ScanKind::rf1 || cfg.kind == ScanKind::rf2 ? 1.0
                                                                                    : cfg.detector.count_rate;
        for (double& v : tr.values)
            v = (v * scale + cfg.detector.dark_rate) * cfg.detector.integration_time;
        tr.value_label = "counts";
    }
    return tr;
}

/// Runs the configured scan, applies the detector if enabled and attaches the
/// configuration meta block.
inline SpectrumTrace run(const ScanConfig& cfg, unsigned threads = thread_count()) {
    cfg.validate();
    SpectrumTrace tr;
    if (cfg.kind == ScanKind::saturation) {
        tr = detail::saturation_trace(cfg, threads, cfg.detector.enabled);
    } else if (cfg.detector.enabled) {
        ScanConfig noiseless = cfg;
        noiseless.detector.enabled = false;
        tr = model_trace(noiseless, threads);
        const double scale = cfg.kind == ScanKind::rf1 || cfg.kind == ScanKind::rf2 ? 1.0
                                                                                    : cfg.detector.count_rate;
        for (double& v : tr.values) v *= scale;
        tr = simulate_counts(tr, DetectorModel{cfg.detector.dark_rate, cfg.detector.integration_time, cfg.seed});
    } else {
        tr = model_trace(cfg, threads);
    }
    const Meta m = config_meta(cfg);
    tr.meta.insert(m.begin(), m.end());
    return tr;
}

inline SpectrumTrace run_rt_scan(const ScanConfig& cfg, unsigned threads = thread_count()) {
    if (cfg.kind != ScanKind::rt_scan && cfg.kind != ScanKind::joint_rt)
        throw ValidationError("run_rt_scan needs kind rt_scan or joint_rt");
    return run(cfg, threads);
}

inline SpectrumTrace run_saturation(const ScanConfig& cfg, unsigned threads = thread_count()) {
    if (cfg.kind != ScanKind::saturation) throw ValidationError("run_saturation needs kind saturation");
    return run(cfg, threads);
}

inline SpectrumTrace run_voltage_map(const ScanConfig& cfg, unsigned threads = thread_count()) {
    if (cfg.kind != ScanKind::voltage_map) throw ValidationError("run_voltage_map needs kind voltage_map");
    return run(cfg, threads);
}

inline SpectrumTrace run_rf(const ScanConfig& cfg, unsigned threads = thread_count()) {
    if (cfg.kind != ScanKind::rf1 && cfg.kind != ScanKind::rf2)
        throw ValidationError("run_rf needs kind rf1 or rf2");
    return run(cfg, threads);
}

}  // namespace wqed
