#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wqed/chain.hpp"
#include "wqed/emitter.hpp"
#include "wqed/errors.hpp"

namespace wqed {

enum class ScanKind { rt_scan, saturation, voltage_map, rf1, rf2, joint_rt };
enum class CouplingModel { single, coupled, uncoupled };
enum class Detection { coherent, total };

inline std::string_view to_string(ScanKind k) {
    switch (k) {
        case ScanKind::rt_scan: return "rt_scan";
        case ScanKind::saturation: return "saturation";
        case ScanKind::voltage_map: return "voltage_map";
        case ScanKind::rf1: return "rf1";
        case ScanKind::rf2: return "rf2";
        case ScanKind::joint_rt: return "joint_rt";
    }
    return "?";
}

inline std::string_view to_string(CouplingModel m) {
    switch (m) {
        case CouplingModel::single: return "single";
        case CouplingModel::coupled: return "coupled";
        case CouplingModel::uncoupled: return "uncoupled";
    }
    return "?";
}

inline std::string_view to_string(Detection d) {
    return d == Detection::coherent ? "coherent" : "total";
}

/// Either start/stop/points (linear or log spacing) or an explicit list.
struct Grid {
    double start = 0.0;
    double stop = 0.0;
    std::size_t points = 0;
    bool log_spacing = false;
    std::vector<double> explicit_values;

    bool empty() const { return explicit_values.empty() && points == 0; }

    static Grid list(std::vector<double> v) {
        Grid g;
        g.explicit_values = std::move(v);
        return g;
    }

    std::vector<double> values() const {
        if (!explicit_values.empty()) return explicit_values;
        std::vector<double> v(points);
        if (points == 1) {
            v[0] = start;
            return v;
        }
        for (std::size_t i = 0; i < points; ++i) {
            const double f = static_cast<double>(i) / static_cast<double>(points - 1);
            v[i] = log_spacing ? start * std::pow(stop / start, f) : start + (stop - start) * f;
        }
        v.back() = stop;
        return v;
    }

    void validate(const char* what) const {
        if (empty()) throw ValidationError(std::string(what) + " grid is empty");
        const auto v = values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i])) throw ValidationError(std::string(what) + " grid is not finite");
            if (i > 0 && !(v[i] > v[i - 1]))
                throw ValidationError(std::string(what) + " grid must be strictly increasing");
        }
        if (log_spacing && explicit_values.empty() && !(start > 0.0 && stop > 0.0))
            throw ValidationError(std::string(what) + " log grid needs positive bounds");
    }
};

struct DetectorSettings {
    bool enabled = false;
    double count_rate = 1.0e5;  // counts/s at unit transmission
    double dark_rate = 0.0;
    double integration_time = 1.0;
};

struct ScanConfig {
    ScanKind kind = ScanKind::rt_scan;
    CouplingModel model = CouplingModel::single;
    Detection detection = Detection::coherent;

    std::vector<EmitterParams> emitters;
    std::vector<std::optional<double>> voltages;  // per emitter gate voltage, V; default v_ref
    std::vector<PropagationPhase> phases;
    double phase_dispersion = 0.0;

    double omega = 0.0;  // rad/ns
    RabiFluxMapping mapping;
    MeanFieldOptions mean_field;

    Grid frequency;                 // THz; auto-sized around center when empty
    std::optional<double> center;   // THz
    double span_linewidths = 6.0;
    std::size_t auto_points = 201;

    Grid omega_grid;  // rad/ns, saturation
    Grid voltage;     // V, voltage map
    std::size_t tuned_emitter = 1;  // 0-based index of the Stark-scanned emitter

    Grid laser_detuning;    // GHz relative to the source resonance (rf)
    Grid emitter_detuning;  // GHz, nu1 - nu2 (rf)
    double amplitude = 1000.0;
    double background = 0.0;

    bool diffusion = false;
    int diffusion_nodes = 21;

    DetectorSettings detector;
    std::uint64_t seed = 0;

    double voltage_of(std::size_t i) const {
        return i < voltages.size() && voltages[i] ? *voltages[i] : emitters[i].v_ref;
    }

    /// Emitters with nu0 moved to their Stark-tuned resonance.
    std::vector<EmitterParams> tuned_emitters() const {
        std::vector<EmitterParams> out = emitters;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i].nu0 = stark_frequency(emitters[i], voltage_of(i));
            out[i].v_ref = voltage_of(i);
        }
        return out;
    }

    ChainSpec chain() const {
        ChainSpec c;
        c.emitters = tuned_emitters();
        c.phases = phases;
        c.phase_dispersion = phase_dispersion;
        return c;
    }

    void validate() const {
        if (emitters.empty()) throw ValidationError("config needs at least one emitter");
        for (const auto& em : emitters) em.validate();
        if (phases.size() + 1 != emitters.size())
            throw ValidationError("config needs one phase per adjacent emitter pair (chain.phase1 ...)");
        if (!(omega >= 0.0) || !std::isfinite(omega)) throw ValidationError("omega must be >= 0");
        if (!(mapping.coefficient > 0.0)) throw ValidationError("flux_coefficient must be > 0");
        if (mean_field.max_iter < 1) throw ValidationError("mean_field.max_iter must be >= 1");
        if (!(mean_field.tol > 0.0)) throw ValidationError("mean_field.tol must be > 0");
        if (!(mean_field.damping > 0.0 && mean_field.damping <= 1.0))
            throw ValidationError("mean_field.damping must lie in (0, 1]");
        if (!(span_linewidths > 0.0)) throw ValidationError("span_linewidths must be > 0");
        if (auto_points < 5) throw ValidationError("scan points must be >= 5");
        if (diffusion_nodes < 3 || diffusion_nodes % 2 == 0)
            throw ValidationError("diffusion nodes must be odd and >= 3");
        if (detector.enabled) {
            if (!(detector.count_rate > 0.0)) throw ValidationError("detector.count_rate must be > 0");
            if (!(detector.dark_rate >= 0.0)) throw ValidationError("detector.dark_rate must be >= 0");
            if (!(detector.integration_time > 0.0))
                throw ValidationError("detector.integration_time must be > 0");
        }
        const std::size_t n = emitters.size();
        switch (kind) {
            case ScanKind::rt_scan:
            case ScanKind::saturation:
            case ScanKind::voltage_map:
                if (n > 2)
                    throw ValidationError(std::string(to_string(kind)) + " supports 1-2 emitters");
                break;
            case ScanKind::joint_rt:
            case ScanKind::rf1:
            case ScanKind::rf2:
                if (n != 2)
                    throw ValidationError(std::string(to_string(kind)) + " needs exactly two emitters");
                break;
        }
        if (model == CouplingModel::single && n != 1 &&
            (kind == ScanKind::rt_scan || kind == ScanKind::saturation))
            throw ValidationError("model 'single' needs exactly one emitter");
        if (model != CouplingModel::single && n == 1)
            throw ValidationError("models 'coupled'/'uncoupled' need two emitters");
        if (kind == ScanKind::joint_rt && model == CouplingModel::single)
            throw ValidationError("joint_rt needs model 'coupled' or 'uncoupled'");
        if (detection == Detection::total) {
            if (kind == ScanKind::voltage_map)
                throw ValidationError("detection 'total' is undefined for weak-drive voltage maps");
            if (kind == ScanKind::saturation) {
                for (double w : omega_grid.values())
                    if (!(w > 0.0))
                        throw ValidationError("detection 'total' needs omega > 0 at every grid point");
            } else if (!(omega > 0.0)) {
                throw ValidationError("detection 'total' needs scan.omega > 0");
            }
        }
        if (!frequency.empty()) frequency.validate("frequency");
        if (kind == ScanKind::saturation) omega_grid.validate("omega");
        if (kind == ScanKind::saturation)
            for (double w : omega_grid.values())
                if (w < 0.0) throw ValidationError("omega grid values must be >= 0");
        if (kind == ScanKind::voltage_map) {
            voltage.validate("voltage");
            if (tuned_emitter >= n) throw ValidationError("voltage_map.tuned must name an emitter");
        }
        if (kind == ScanKind::rf1 || kind == ScanKind::rf2) {
            laser_detuning.validate("rf laser detuning");
            emitter_detuning.validate("rf emitter detuning");
        }
    }
};

}  // namespace wqed
