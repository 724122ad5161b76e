#pragma once

// Run configuration: INI-style sections of `key = value` lines, physical
// quantities with explicit unit suffixes, canonical re-serialisation (used for
// trace metadata and the config hash) and nearest-key suggestions.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wqed/errors.hpp"
#include "wqed/format.hpp"
#include "wqed/scan_config.hpp"
#include "wqed/units.hpp"

namespace wqed {

/// Flat "section.key" -> raw value text.
using KeyValues = std::map<std::string, std::string>;

namespace detail {
inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}
}  // namespace detail

/// Parses INI text. `#` and `;` start comments (full line, or after
/// whitespace). Keys outside any section are rejected.
inline KeyValues parse_ini(std::string_view text, const std::string& source = "config") {
    KeyValues kv;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if ((line[i] == '#' || line[i] == ';') &&
                (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
                line.erase(i);
                break;
            }
        }
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto where = source + ":" + std::to_string(line_no);
        if (t.front() == '[') {
            if (t.back() != ']') throw ValidationError(where + ": malformed section header");
            section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            if (section.empty()) throw ValidationError(where + ": empty section name");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ValidationError(where + ": expected 'key = value'");
        if (section.empty()) throw ValidationError(where + ": key outside of a section");
        const std::string key = section + "." + detail::trim(std::string_view(t).substr(0, eq));
        const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (!kv.emplace(key, value).second)
            throw ValidationError(where + ": duplicate key '" + key + "'");
    }
    return kv;
}

inline KeyValues read_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_ini(ss.str(), path);
}

/// Physical dimension of a configuration value and its accepted suffixes.
enum class Quantity {
    dimensionless,  // no suffix
    frequency,      // THz | GHz, stored THz
    rate,           // GHz | MHz (linear, times 2 pi) | rad/ns, stored rad/ns
    slope,          // GHz/V | MHz/V | rad/ns/V, stored rad/ns/V
    detuning,       // GHz | MHz, stored GHz
    voltage,        // V | mV, stored V
    phase,          // deg | rad, stored rad
    time,           // s | ms | us, stored s
    dispersion,     // ns, stored ns
    count_rate,     // optional cps, stored counts/s
};

namespace detail {
struct UnitFactor {
    const char* unit;
    double factor;
};

inline std::vector<UnitFactor> units_for(Quantity q) {
    switch (q) {
        case Quantity::dimensionless: return {};
        case Quantity::frequency: return {{"THz", 1.0}, {"GHz", 1e-3}};
        case Quantity::rate: return {{"rad/ns", 1.0}, {"GHz", two_pi}, {"MHz", two_pi * 1e-3}};
        case Quantity::slope:
            return {{"rad/ns/V", 1.0}, {"GHz/V", two_pi}, {"MHz/V", two_pi * 1e-3}};
        case Quantity::detuning: return {{"GHz", 1.0}, {"MHz", 1e-3}};
        case Quantity::voltage: return {{"V", 1.0}, {"mV", 1e-3}};
        case Quantity::phase: return {{"rad", 1.0}, {"deg", std::numbers::pi / 180.0}};
        case Quantity::time: return {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}};
        case Quantity::dispersion: return {{"ns", 1.0}};
        case Quantity::count_rate: return {{"cps", 1.0}};
    }
    return {};
}

inline const char* canonical_unit(Quantity q) {
    const auto u = units_for(q);
    return u.empty() ? "" : u.front().unit;
}

inline std::string expected_units(Quantity q) {
    std::string s;
    for (const auto& u : units_for(q)) s += (s.empty() ? "" : " or ") + std::string(u.unit);
    return s;
}
}  // namespace detail

/// Parses "<number> <unit>" into canonical units; `what` names the key.
inline double parse_quantity(const std::string& text, Quantity q, const std::string& what) {
    const std::string t = detail::trim(text);
    std::size_t split = t.size();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (std::isspace(static_cast<unsigned char>(t[i]))) {
            split = i;
            break;
        }
    }
    const std::string number = t.substr(0, split);
    const std::string unit = detail::trim(std::string_view(t).substr(split));
    double value = 0.0;
    if (!parse_double(number, value) || !std::isfinite(value))
        throw ValidationError("key '" + what + "': '" + text + "' is not a finite number");
    const auto units = detail::units_for(q);
    if (unit.empty()) {
        if (units.empty() || q == Quantity::count_rate) return value;
        throw ValidationError("key '" + what + "': missing unit suffix (expected " +
                              detail::expected_units(q) + ")");
    }
    for (const auto& u : units)
        if (unit == u.unit) return u.factor == 1.0 ? value : value * u.factor;
    if (units.empty())
        throw ValidationError("key '" + what + "': dimensionless value takes no unit, got '" + unit + "'");
    throw ValidationError("key '" + what + "': unit '" + unit + "' does not match (expected " +
                          detail::expected_units(q) + ")");
}

/// Canonical text for a value already in canonical units.
inline std::string format_quantity(double value, Quantity q) {
    const char* unit = detail::canonical_unit(q);
    std::string s = format_double(value);
    if (*unit && q != Quantity::count_rate) s += std::string(" ") + unit;
    return s;
}

/// Quantity of an emitter field, or nullopt if the field is unknown.
inline std::optional<Quantity> emitter_field_quantity(std::string_view field) {
    static const std::map<std::string, Quantity, std::less<>> fields{
        {"nu0", Quantity::frequency},     {"gamma", Quantity::rate},
        {"beta", Quantity::dimensionless}, {"gamma_d", Quantity::rate},
        {"sigma_sd", Quantity::rate},     {"dipole_splitting", Quantity::rate},
        {"second_beta", Quantity::dimensionless}, {"tuning_slope", Quantity::slope},
        {"v_ref", Quantity::voltage},     {"voltage", Quantity::voltage},
    };
    const auto it = fields.find(field);
    if (it == fields.end()) return std::nullopt;
    return it->second;
}

namespace detail {
struct KeySpec {
    std::string key;
    Quantity quantity = Quantity::dimensionless;
};

inline void add_grid_keys(std::vector<std::string>& keys, const std::string& prefix) {
    for (const char* s : {"_start", "_stop", "_points", "_spacing", "_list"}) keys.push_back(prefix + s);
}

inline const std::vector<std::string>& static_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k{
            "scan.kind", "scan.model", "scan.detection", "scan.omega", "scan.center",
            "scan.span_linewidths", "scan.points", "scan.seed", "scan.flux_coefficient",
            "chain.phase_dispersion", "chain.separation", "chain.group_velocity",
            "voltage_map.tuned", "rf.amplitude", "rf.background",
            "diffusion.enabled", "diffusion.nodes",
            "detector.enabled", "detector.count_rate", "detector.dark_rate",
            "detector.integration_time",
            "mean_field.max_iter", "mean_field.tol", "mean_field.damping",
            "fit.data", "fit.restarts", "fit.max_evals",
            "profile.param", "profile.start", "profile.stop", "profile.points",
        };
        add_grid_keys(k, "scan.freq");
        add_grid_keys(k, "saturation.omega");
        add_grid_keys(k, "voltage_map.v");
        add_grid_keys(k, "rf.laser");
        add_grid_keys(k, "rf.detuning");
        return k;
    }();
    return keys;
}

/// Parses "<prefix><N>" with N >= 1.
inline std::optional<std::size_t> indexed(std::string_view s, std::string_view prefix) {
    if (s.size() <= prefix.size() || s.substr(0, prefix.size()) != prefix) return std::nullopt;
    std::size_t n = 0;
    for (char c : s.substr(prefix.size())) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        n = n * 10 + static_cast<std::size_t>(c - '0');
    }
    if (n == 0) return std::nullopt;
    return n;
}

inline bool is_known_key(const std::string& key) {
    const auto& keys = static_keys();
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) return true;
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    const std::string field = dot == std::string::npos ? "" : key.substr(dot + 1);
    if (indexed(section, "emitter") && emitter_field_quantity(field)) return true;
    if (section == "chain" && indexed(field, "phase")) return true;
    if (section == "free") return true;
    return false;
}

inline std::string nearest_key(const std::string& key) {
    std::vector<std::string> candidates = static_keys();
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    std::string emitter_section = "emitter1";
    if (indexed(section, "emitter")) emitter_section = section;
    for (const char* f : {"nu0", "gamma", "beta", "gamma_d", "sigma_sd", "dipole_splitting",
                          "second_beta", "tuning_slope", "v_ref", "voltage"})
        candidates.push_back(emitter_section + "." + f);
    candidates.push_back("chain.phase1");
    std::string best;
    std::size_t best_d = static_cast<std::size_t>(-1);
    for (const auto& c : candidates) {
        const std::size_t d = edit_distance(key, c);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    const std::string l = lower(v);
    if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
    if (l == "false" || l == "no" || l == "off" || l == "0") return false;
    throw ValidationError("key '" + key + "': expected true/false, got '" + v + "'");
}

inline long long parse_int(const std::string& v, const std::string& key) {
    double d = 0.0;
    if (!parse_double(v, d) || d != std::floor(d) || std::abs(d) > 9.0e15)
        throw ValidationError("key '" + key + "': expected an integer, got '" + v + "'");
    return static_cast<long long>(d);
}

inline std::uint64_t parse_seed(const std::string& v, const std::string& key) {
    std::uint64_t s = 0;
    const std::string t = trim(v);
    auto res = std::from_chars(t.data(), t.data() + t.size(), s);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw ValidationError("key '" + key + "': expected an unsigned 64-bit seed, got '" + v + "'");
    return s;
}
}  // namespace detail

/// Throws ValidationError naming the first unknown key and its nearest valid key.
inline void check_known_keys(const KeyValues& kv) {
    for (const auto& [key, value] : kv)
        if (!detail::is_known_key(key))
            throw ValidationError("unknown key '" + key + "'; did you mean '" +
                                  detail::nearest_key(key) + "'?");
}

namespace detail {
class Reader {
public:
    explicit Reader(const KeyValues& kv) : kv_(kv) {}

    const std::string* raw(const std::string& key) const {
        const auto it = kv_.find(key);
        return it == kv_.end() ? nullptr : &it->second;
    }
    std::optional<double> quantity(const std::string& key, Quantity q) const {
        if (const auto* v = raw(key)) return parse_quantity(*v, q, key);
        return std::nullopt;
    }
    double quantity_or(const std::string& key, Quantity q, double fallback) const {
        return quantity(key, q).value_or(fallback);
    }
    bool boolean_or(const std::string& key, bool fallback) const {
        if (const auto* v = raw(key)) return parse_bool(*v, key);
        return fallback;
    }
    long long integer_or(const std::string& key, long long fallback) const {
        if (const auto* v = raw(key)) return parse_int(*v, key);
        return fallback;
    }
    Grid grid(const std::string& prefix, Quantity q) const {
        Grid g;
        if (const auto* list = raw(prefix + "_list")) {
            for (const auto& item : split(*list, ','))
                g.explicit_values.push_back(parse_quantity(item, q, prefix + "_list"));
            if (raw(prefix + "_start") || raw(prefix + "_stop") || raw(prefix + "_points"))
                throw ValidationError("grid '" + prefix + "': give either _list or _start/_stop/_points");
            return g;
        }
        const bool any = raw(prefix + "_start") || raw(prefix + "_stop") || raw(prefix + "_points");
        if (!any) return g;
        const auto start = quantity(prefix + "_start", q);
        const auto stop = quantity(prefix + "_stop", q);
        if (!start || !stop)
            throw ValidationError("grid '" + prefix + "' needs both _start and _stop");
        g.start = *start;
        g.stop = *stop;
        const long long pts = integer_or(prefix + "_points", 0);
        if (pts < 1) throw ValidationError("grid '" + prefix + "' needs _points >= 1");
        g.points = static_cast<std::size_t>(pts);
        if (const auto* sp = raw(prefix + "_spacing")) {
            if (*sp == "log") g.log_spacing = true;
            else if (*sp != "linear")
                throw ValidationError("key '" + prefix + "_spacing': expected 'linear' or 'log'");
        }
        if (g.points == 1 && g.start != g.stop)
            throw ValidationError("grid '" + prefix + "': a single point needs start == stop");
        return g;
    }

private:
    const KeyValues& kv_;
};

inline void write_grid(KeyValues& kv, const std::string& prefix, const Grid& g, Quantity q) {
    if (g.empty()) return;
    if (!g.explicit_values.empty()) {
        std::string s;
        for (std::size_t i = 0; i < g.explicit_values.size(); ++i)
            s += (i ? ", " : "") + format_quantity(g.explicit_values[i], q);
        kv[prefix + "_list"] = s;
        return;
    }
    kv[prefix + "_start"] = format_quantity(g.start, q);
    kv[prefix + "_stop"] = format_quantity(g.stop, q);
    kv[prefix + "_points"] = std::to_string(g.points);
    kv[prefix + "_spacing"] = g.log_spacing ? "log" : "linear";
}
}  // namespace detail

inline ScanKind parse_scan_kind(const std::string& v) {
    for (ScanKind k : {ScanKind::rt_scan, ScanKind::saturation, ScanKind::voltage_map, ScanKind::rf1,
                       ScanKind::rf2, ScanKind::joint_rt})
        if (v == to_string(k)) return k;
    throw ValidationError("key 'scan.kind': unknown kind '" + v +
                          "' (rt_scan, saturation, voltage_map, rf1, rf2, joint_rt)");
}

/// Builds and validates a ScanConfig from key/values (unknown keys rejected).
inline ScanConfig scan_config_from(const KeyValues& kv) {
    check_known_keys(kv);
    detail::Reader rd(kv);
    ScanConfig cfg;

    if (const auto* v = rd.raw("scan.kind")) cfg.kind = parse_scan_kind(*v);
    if (const auto* v = rd.raw("scan.model")) {
        if (*v == "single") cfg.model = CouplingModel::single;
        else if (*v == "coupled") cfg.model = CouplingModel::coupled;
        else if (*v == "uncoupled") cfg.model = CouplingModel::uncoupled;
        else throw ValidationError("key 'scan.model': expected single, coupled or uncoupled");
    }
    if (const auto* v = rd.raw("scan.detection")) {
        if (*v == "coherent") cfg.detection = Detection::coherent;
        else if (*v == "total") cfg.detection = Detection::total;
        else throw ValidationError("key 'scan.detection': expected coherent or total");
    }

    // Emitters must be numbered contiguously from 1.
    std::set<std::size_t> emitter_ids;
    std::set<std::size_t> phase_ids;
    for (const auto& [key, value] : kv) {
        const auto dot = key.find('.');
        if (auto n = detail::indexed(key.substr(0, dot), "emitter")) emitter_ids.insert(*n);
        if (key.substr(0, dot) == "chain")
            if (auto n = detail::indexed(key.substr(dot + 1), "phase")) phase_ids.insert(*n);
    }
    for (std::size_t i = 1; i <= emitter_ids.size(); ++i)
        if (!emitter_ids.count(i))
            throw ValidationError("emitter sections must be numbered emitter1, emitter2, ...");
    for (std::size_t id = 1; id <= emitter_ids.size(); ++id) {
        const std::string s = "emitter" + std::to_string(id) + ".";
        EmitterParams em;
        const auto nu0 = rd.quantity(s + "nu0", Quantity::frequency);
        const auto gamma = rd.quantity(s + "gamma", Quantity::rate);
        const auto beta = rd.quantity(s + "beta", Quantity::dimensionless);
        if (!nu0 || !gamma || !beta)
            throw ValidationError("emitter" + std::to_string(id) + " needs nu0, gamma and beta");
        em.nu0 = *nu0;
        em.gamma = *gamma;
        em.beta = *beta;
        em.gamma_d = rd.quantity_or(s + "gamma_d", Quantity::rate, 0.0);
        em.sigma_sd = rd.quantity_or(s + "sigma_sd", Quantity::rate, 0.0);
        em.dipole_splitting = rd.quantity_or(s + "dipole_splitting", Quantity::rate, 0.0);
        em.second_beta = rd.quantity(s + "second_beta", Quantity::dimensionless);
        em.tuning_slope = rd.quantity_or(s + "tuning_slope", Quantity::slope, 0.0);
        em.v_ref = rd.quantity_or(s + "v_ref", Quantity::voltage, 0.0);
        cfg.emitters.push_back(em);
        cfg.voltages.push_back(rd.quantity(s + "voltage", Quantity::voltage));
    }
    for (std::size_t i = 1; i <= phase_ids.size(); ++i)
        if (!phase_ids.count(i)) throw ValidationError("chain phases must be numbered phase1, phase2, ...");
    for (std::size_t i = 1; i <= phase_ids.size(); ++i)
        cfg.phases.push_back(PropagationPhase::from_total(
            *rd.quantity("chain.phase" + std::to_string(i), Quantity::phase)));
    cfg.phase_dispersion = rd.quantity_or("chain.phase_dispersion", Quantity::dispersion, 0.0);

    cfg.omega = rd.quantity_or("scan.omega", Quantity::rate, 0.0);
    cfg.mapping.coefficient = rd.quantity_or("scan.flux_coefficient", Quantity::dimensionless, 2.0);
    cfg.center = rd.quantity("scan.center", Quantity::frequency);
    cfg.span_linewidths = rd.quantity_or("scan.span_linewidths", Quantity::dimensionless, 6.0);
    const long long pts = rd.integer_or("scan.points", 201);
    if (pts < 5) throw ValidationError("key 'scan.points': must be >= 5");
    cfg.auto_points = static_cast<std::size_t>(pts);
    if (const auto* v = rd.raw("scan.seed")) cfg.seed = detail::parse_seed(*v, "scan.seed");
    cfg.frequency = rd.grid("scan.freq", Quantity::frequency);

    cfg.omega_grid = rd.grid("saturation.omega", Quantity::rate);
    cfg.voltage = rd.grid("voltage_map.v", Quantity::voltage);
    const long long tuned =
        rd.integer_or("voltage_map.tuned", static_cast<long long>(cfg.emitters.size()));
    if (tuned < 1) throw ValidationError("key 'voltage_map.tuned': expected an emitter number >= 1");
    cfg.tuned_emitter = static_cast<std::size_t>(tuned - 1);

    cfg.laser_detuning = rd.grid("rf.laser", Quantity::detuning);
    cfg.emitter_detuning = rd.grid("rf.detuning", Quantity::detuning);
    cfg.amplitude = rd.quantity_or("rf.amplitude", Quantity::count_rate, 1000.0);
    cfg.background = rd.quantity_or("rf.background", Quantity::count_rate, 0.0);

    cfg.diffusion = rd.boolean_or("diffusion.enabled", false);
    cfg.diffusion_nodes = static_cast<int>(rd.integer_or("diffusion.nodes", 21));

    cfg.detector.enabled = rd.boolean_or("detector.enabled", false);
    cfg.detector.count_rate = rd.quantity_or("detector.count_rate", Quantity::count_rate, 1.0e5);
    cfg.detector.dark_rate = rd.quantity_or("detector.dark_rate", Quantity::count_rate, 0.0);
    cfg.detector.integration_time = rd.quantity_or("detector.integration_time", Quantity::time, 1.0);

    cfg.mean_field.max_iter = static_cast<int>(rd.integer_or("mean_field.max_iter", 500));
    cfg.mean_field.tol = rd.quantity_or("mean_field.tol", Quantity::dimensionless, 1e-10);
    cfg.mean_field.damping = rd.quantity_or("mean_field.damping", Quantity::dimensionless, 0.5);

    if (const auto sep = rd.quantity("chain.separation", Quantity::dimensionless); sep && *sep <= 0.0)
        throw ValidationError("key 'chain.separation': must be > 0 (um)");
    if (const auto vg = rd.quantity("chain.group_velocity", Quantity::dimensionless); vg && *vg <= 0.0)
        throw ValidationError("key 'chain.group_velocity': must be > 0 (m/s)");

    cfg.validate();
    return cfg;
}

/// Canonical key/values: every resolved setting in canonical units, so that
/// parsing the result reproduces the same ScanConfig bit for bit.
inline KeyValues to_keyvalues(const ScanConfig& cfg) {
    using detail::write_grid;
    KeyValues kv;
    kv["scan.kind"] = std::string(to_string(cfg.kind));
    kv["scan.model"] = std::string(to_string(cfg.model));
    kv["scan.detection"] = std::string(to_string(cfg.detection));
    kv["scan.omega"] = format_quantity(cfg.omega, Quantity::rate);
    kv["scan.flux_coefficient"] = format_double(cfg.mapping.coefficient);
    if (cfg.center) kv["scan.center"] = format_quantity(*cfg.center, Quantity::frequency);
    kv["scan.span_linewidths"] = format_double(cfg.span_linewidths);
    kv["scan.points"] = std::to_string(cfg.auto_points);
    kv["scan.seed"] = std::to_string(cfg.seed);
    write_grid(kv, "scan.freq", cfg.frequency, Quantity::frequency);

    for (std::size_t i = 0; i < cfg.emitters.size(); ++i) {
        const auto& em = cfg.emitters[i];
        const std::string s = "emitter" + std::to_string(i + 1) + ".";
        kv[s + "nu0"] = format_quantity(em.nu0, Quantity::frequency);
        kv[s + "gamma"] = format_quantity(em.gamma, Quantity::rate);
        kv[s + "beta"] = format_double(em.beta);
        kv[s + "gamma_d"] = format_quantity(em.gamma_d, Quantity::rate);
        kv[s + "sigma_sd"] = format_quantity(em.sigma_sd, Quantity::rate);
        kv[s + "dipole_splitting"] = format_quantity(em.dipole_splitting, Quantity::rate);
        if (em.second_beta) kv[s + "second_beta"] = format_double(*em.second_beta);
        kv[s + "tuning_slope"] = format_quantity(em.tuning_slope, Quantity::slope);
        kv[s + "v_ref"] = format_quantity(em.v_ref, Quantity::voltage);
        if (i < cfg.voltages.size() && cfg.voltages[i])
            kv[s + "voltage"] = format_quantity(*cfg.voltages[i], Quantity::voltage);
    }
    for (std::size_t i = 0; i < cfg.phases.size(); ++i)
        kv["chain.phase" + std::to_string(i + 1)] = format_quantity(cfg.phases[i].total(), Quantity::phase);
    kv["chain.phase_dispersion"] = format_quantity(cfg.phase_dispersion, Quantity::dispersion);

    write_grid(kv, "saturation.omega", cfg.omega_grid, Quantity::rate);
    write_grid(kv, "voltage_map.v", cfg.voltage, Quantity::voltage);
    if (cfg.kind == ScanKind::voltage_map)
        kv["voltage_map.tuned"] = std::to_string(cfg.tuned_emitter + 1);
    write_grid(kv, "rf.laser", cfg.laser_detuning, Quantity::detuning);
    write_grid(kv, "rf.detuning", cfg.emitter_detuning, Quantity::detuning);
    kv["rf.amplitude"] = format_double(cfg.amplitude);
    kv["rf.background"] = format_double(cfg.background);

    kv["diffusion.enabled"] = cfg.diffusion ? "true" : "false";
    kv["diffusion.nodes"] = std::to_string(cfg.diffusion_nodes);
    kv["detector.enabled"] = cfg.detector.enabled ? "true" : "false";
    kv["detector.count_rate"] = format_double(cfg.detector.count_rate);
    kv["detector.dark_rate"] = format_double(cfg.detector.dark_rate);
    kv["detector.integration_time"] = format_quantity(cfg.detector.integration_time, Quantity::time);
    kv["mean_field.max_iter"] = std::to_string(cfg.mean_field.max_iter);
    kv["mean_field.tol"] = format_double(cfg.mean_field.tol);
    kv["mean_field.damping"] = format_double(cfg.mean_field.damping);
    return kv;
}

/// "key = value" lines in key order.
inline std::string canonical_text(const KeyValues& kv) {
    std::string s;
    for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
    return s;
}

/// FNV-1a 64-bit of the canonical text, as 16 hex digits.
inline std::string config_hash(const KeyValues& kv) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical_text(kv)) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return out;
}

/// Applies "section.key=value" overrides.
inline void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValidationError("override '" + o + "' must look like section.key=value");
        kv[detail::trim(std::string_view(o).substr(0, eq))] = detail::trim(std::string_view(o).substr(eq + 1));
    }
}

}  // namespace wqed
