#pragma once

// The `wqed` command line, callable in-process through run_cli.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wqed/config.hpp"
#include "wqed/errors.hpp"
#include "wqed/fit.hpp"
#include "wqed/manifest.hpp"
#include "wqed/oracle.hpp"
#include "wqed/scenarios.hpp"
#include "wqed/trace_io.hpp"

namespace wqed {

namespace detail {
inline bool has_suffix(const std::string& s, const char* suffix) {
    const std::string suf(suffix);
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

struct CliContext {
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string format = "csv";
    std::vector<std::string> overrides;
    std::string command;
    std::string started;
    std::ostream* out = nullptr;
};

/// Key/values from an INI config, or from the metadata of a trace file.
inline KeyValues load_keyvalues(const std::string& path, const CliContext& ctx) {
    KeyValues kv;
    if (has_suffix(path, ".csv") || has_suffix(path, ".json")) {
        kv = to_keyvalues(config_from_meta(read_trace(path).meta));
    } else {
        kv = read_config_file(path);
    }
    apply_overrides(kv, ctx.overrides);
    if (ctx.seed) kv["scan.seed"] = std::to_string(*ctx.seed);
    return kv;
}

inline ScanConfig load_scan_config(const std::string& path, const CliContext& ctx,
                                   std::vector<ScanKind> allowed, KeyValues* raw = nullptr) {
    KeyValues kv = load_keyvalues(path, ctx);
    if (!kv.count("scan.kind")) kv["scan.kind"] = std::string(to_string(allowed.front()));
    ScanConfig cfg = scan_config_from(kv);
    if (std::find(allowed.begin(), allowed.end(), cfg.kind) == allowed.end())
        throw ValidationError("config kind '" + std::string(to_string(cfg.kind)) + "' does not match command '" +
                              ctx.command + "'");
    if (raw) *raw = std::move(kv);
    return cfg;
}

inline std::string output_path(const CliContext& ctx, const std::string& stem) {
    std::filesystem::create_directories(ctx.out_dir);
    return (std::filesystem::path(ctx.out_dir) / (stem + "." + ctx.format)).string();
}

inline void write_manifest(const CliContext& ctx, const std::string& hash, std::uint64_t seed,
                           const std::vector<std::string>& outputs) {
    RunManifest m;
    m.version = tool_version;
    m.command = ctx.command;
    m.config_hash = hash;
    m.seed = seed;
    m.started = ctx.started;
    m.finished = utc_timestamp();
    for (const auto& o : outputs) m.outputs.push_back(std::filesystem::path(o).filename().string());
    std::filesystem::create_directories(ctx.out_dir);
    write_text_file((std::filesystem::path(ctx.out_dir) / "manifest.json").string(), to_json(m).dump(2) + "\n");
}

inline int run_scan(const std::string& path, const CliContext& ctx, std::vector<ScanKind> allowed) {
    const ScanConfig cfg = load_scan_config(path, ctx, allowed);
    const SpectrumTrace tr = run(cfg);
    const std::string file = output_path(ctx, std::string(to_string(cfg.kind)));
    if (ctx.format == "json") write_trace_json(file, tr);
    else write_trace_csv(file, tr);
    write_manifest(ctx, tr.meta.at("config_hash"), cfg.seed, {file});
    *ctx.out << "wrote " << file << " (" << tr.values.size() << " values)\n";
    return 0;
}

inline std::string resolve_relative(const std::string& config_path, const std::string& p) {
    const std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (std::filesystem::path(config_path).parent_path() / fp).string();
}

inline FitProblem load_fit_problem(const std::string& path, const CliContext& ctx,
                                   const std::string& data_flag, KeyValues& kv) {
    FitProblem p;
    p.model = load_scan_config(path, ctx,
                               {ScanKind::rt_scan, ScanKind::saturation, ScanKind::voltage_map, ScanKind::rf1,
                                ScanKind::rf2, ScanKind::joint_rt},
                               &kv);
    std::string data = data_flag;
    if (data.empty()) {
        const auto it = kv.find("fit.data");
        if (it == kv.end()) throw ValidationError("fit needs a data file (fit.data or --data)");
        data = resolve_relative(path, it->second);
    }
    p.data = read_trace(data);
    p.free = free_parameters_from(kv);
    p.options = fit_options_from(kv, p.model.seed);
    return p;
}

inline nlohmann::ordered_json fit_json(const FitResult& r) {
    nlohmann::ordered_json j;
    j["parameters"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.names.size(); ++i)
        j["parameters"].push_back({{"name", r.names[i]},
                                   {"value", display_value(r.names[i], r.estimates[i])},
                                   {"uncertainty", display_value(r.names[i], r.uncertainties[i])},
                                   {"unit", display_unit(r.names[i])}});
    j["chi2"] = r.chi2;
    j["chi2_init"] = r.chi2_init;
    j["chi2_reduced"] = r.chi2_reduced;
    j["dof"] = r.dof;
    j["converged"] = r.converged;
    j["ill_posed"] = r.ill_posed;
    j["evaluations"] = r.evaluations;
    j["iterations"] = r.iterations;
    j["restarts"] = r.restarts;
    j["best_restart"] = r.best_restart;
    j["simplex_size"] = r.simplex_size;
    return j;
}

inline void write_fit(const CliContext& ctx, const std::string& file, const FitResult& r, const std::string& hash) {
    if (ctx.format == "json") {
        auto j = fit_json(r);
        j["config_hash"] = hash;
        write_text_file(file, j.dump(2) + "\n");
        return;
    }
    std::ostringstream s;
    s << "# config_hash=" << hash << "\n";
    s << "# chi2=" << format_double(r.chi2) << "\n";
    s << "# chi2_reduced=" << format_double(r.chi2_reduced) << "\n";
    s << "# dof=" << r.dof << "\n";
    s << "# converged=" << (r.converged ? "true" : "false") << "\n";
    s << "# ill_posed=" << (r.ill_posed ? "true" : "false") << "\n";
    s << "# evaluations=" << r.evaluations << "\n";
    s << "# restarts=" << r.restarts << "\n";
    s << "# best_restart=" << r.best_restart << "\n";
    s << "# simplex_size=" << format_double(r.simplex_size) << "\n";
    s << "name,value,uncertainty,unit\n";
    for (std::size_t i = 0; i < r.names.size(); ++i)
        s << r.names[i] << "," << format_double(display_value(r.names[i], r.estimates[i])) << ","
          << format_double(display_value(r.names[i], r.uncertainties[i])) << "," << display_unit(r.names[i]) << "\n";
    write_text_file(file, s.str());
}

inline void print_fit(std::ostream& out, const FitResult& r) {
    for (std::size_t i = 0; i < r.names.size(); ++i)
        out << r.names[i] << " = " << display_value(r.names[i], r.estimates[i]) << " +- "
            << display_value(r.names[i], r.uncertainties[i]) << " " << display_unit(r.names[i]) << "\n";
    out << "chi2_reduced = " << r.chi2_reduced << (r.ill_posed ? " (Hessian not positive definite)" : "") << "\n";
}

inline int run_fit(const std::string& path, const std::string& data_flag, const CliContext& ctx) {
    KeyValues kv;
    const FitProblem p = load_fit_problem(path, ctx, data_flag, kv);
    const std::string hash = config_hash(kv);
    const std::string file = output_path(ctx, "fit_result");
    try {
        const FitResult r = fit(p);
        write_fit(ctx, file, r, hash);
        write_manifest(ctx, hash, p.model.seed, {file});
        print_fit(*ctx.out, r);
        return 0;
    } catch (const FitNonConvergence& e) {
        write_fit(ctx, file, e.partial(), hash);
        write_manifest(ctx, hash, p.model.seed, {file});
        print_fit(*ctx.out, e.partial());
        throw;
    }
}

inline int run_profile(const std::string& path, const std::string& data_flag, const CliContext& ctx) {
    KeyValues kv;
    const FitProblem p = load_fit_problem(path, ctx, data_flag, kv);
    const auto param = kv.find("profile.param");
    if (param == kv.end()) throw ValidationError("profile needs profile.param");
    const Quantity q = parameter_quantity(param->second);
    const auto start = kv.find("profile.start");
    const auto stop = kv.find("profile.stop");
    if (start == kv.end() || stop == kv.end()) throw ValidationError("profile needs profile.start and profile.stop");
    Grid g;
    g.start = parse_quantity(start->second, q, "profile.start");
    g.stop = parse_quantity(stop->second, q, "profile.stop");
    const long long pts = kv.count("profile.points") ? parse_int(kv.at("profile.points"), "profile.points") : 21;
    if (pts < 2) throw ValidationError("key 'profile.points': must be >= 2");
    g.points = static_cast<std::size_t>(pts);
    g.validate("profile");
    const auto curve = profile_parameter(p, param->second, g.values());

    const std::string hash = config_hash(kv);
    const std::string file = output_path(ctx, "profile");
    const std::string col = param->second + (display_unit(param->second).empty() ? "" : "_" + display_unit(param->second));
    if (ctx.format == "json") {
        nlohmann::ordered_json j;
        j["config_hash"] = hash;
        j["parameter"] = param->second;
        j["unit"] = display_unit(param->second);
        j["points"] = nlohmann::ordered_json::array();
        for (const auto& c : curve)
            j["points"].push_back(
                {{"value", display_value(param->second, c.value)}, {"chi2", c.chi2}, {"converged", c.converged}});
        write_text_file(file, j.dump(2) + "\n");
    } else {
        std::ostringstream s;
        s << "# config_hash=" << hash << "\n# parameter=" << param->second << "\n";
        s << col << ",chi2,converged\n";
        for (const auto& c : curve)
            s << format_double(display_value(param->second, c.value)) << "," << format_double(c.chi2) << ","
              << (c.converged ? 1 : 0) << "\n";
        write_text_file(file, s.str());
    }
    write_manifest(ctx, hash, p.model.seed, {file});
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (curve[i].chi2 < curve[best].chi2) best = i;
    *ctx.out << "chi2 minimum at " << param->second << " = " << display_value(param->second, curve[best].value) << " "
             << display_unit(param->second) << " (chi2 " << curve[best].chi2 << ")\n";
    return 0;
}

inline int run_validate(const std::string& path, const CliContext& ctx) {
    KeyValues kv = load_keyvalues(path, ctx);
    const ScanConfig cfg = scan_config_from(kv);
    if (kv.count("profile.param") || std::any_of(kv.begin(), kv.end(), [](const auto& e) {
            return e.first.rfind("free.", 0) == 0;
        })) {
        const auto fp = free_parameters_from(kv);
        for (const auto& f : fp)
            if (!(f.init >= f.lower && f.init <= f.upper))
                throw ValidationError("initial value of '" + f.name + "' lies outside its bounds");
        fit_options_from(kv, cfg.seed);
    }
    const KeyValues resolved = to_keyvalues(cfg);
    *ctx.out << canonical_text(resolved);
    *ctx.out << "# config_hash = " << config_hash(resolved) << "\n";
    return 0;
}
}  // namespace detail

/// Runs the CLI with argv-style arguments (args[0] is the program name).
/// Returns the process exit code: 0 success, 2 validation error, 3
/// non-convergence, 1 anything else.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    CLI::App app{"Waveguide QED transport simulator and fitter", "wqed"};
    app.require_subcommand(1);
    app.fallthrough();
    detail::CliContext ctx;
    ctx.out = &out;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Master RNG seed (overrides scan.seed)");
    app.add_option("--out-dir", ctx.out_dir, "Output directory")->capture_default_str();
    app.add_option("--format", ctx.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app.add_option("--set", ctx.overrides, "Override a config entry, section.key=value")->take_all();

    std::string config;
    std::string data;
    int nodes = 21;
    struct Sub {
        const char* name;
        const char* help;
    };
    const std::vector<Sub> scans{{"rt-scan", "Resonant-transmission scan"},
                                 {"saturation", "Extinction versus drive strength"},
                                 {"voltage-map", "Transmission versus frequency and gate voltage"},
                                 {"rf", "Resonance-fluorescence map (rf1 or rf2)"},
                                 {"joint-rt", "Joint two-emitter transmission scan"}};
    std::vector<CLI::App*> subs;
    for (const auto& s : scans) {
        auto* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("config", config, "Config file, or a trace file to regenerate")->required();
        subs.push_back(sub);
    }
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a trace");
    fit_cmd->add_option("config", config, "Fit config file")->required();
    fit_cmd->add_option("--data", data, "Trace to fit (overrides fit.data)");
    auto* profile_cmd = app.add_subcommand("profile", "Profile chi^2 along one parameter");
    profile_cmd->add_option("config", config, "Fit config file with a [profile] section")->required();
    profile_cmd->add_option("--data", data, "Trace to fit (overrides fit.data)");
    auto* oracle_cmd = app.add_subcommand("oracle", "Run the brute-force cross-checks");
    oracle_cmd->add_option("--nodes", nodes, "Gauss-Hermite node count for the diffusion check")->capture_default_str();
    auto* validate_cmd = app.add_subcommand("validate", "Check a config and print the resolved parameters");
    validate_cmd->add_option("config", config, "Config file")->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    if (*seed_opt) ctx.seed = seed;
    ctx.started = utc_timestamp();

    try {
        const std::vector<std::vector<ScanKind>> kinds{{ScanKind::rt_scan},
                                                       {ScanKind::saturation},
                                                       {ScanKind::voltage_map},
                                                       {ScanKind::rf1, ScanKind::rf2},
                                                       {ScanKind::joint_rt}};
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            ctx.command = scans[i].name;
            return detail::run_scan(config, ctx, kinds[i]);
        }
        if (fit_cmd->parsed()) {
            ctx.command = "fit";
            return detail::run_fit(config, data, ctx);
        }
        if (profile_cmd->parsed()) {
            ctx.command = "profile";
            return detail::run_profile(config, data, ctx);
        }
        if (validate_cmd->parsed()) {
            ctx.command = "validate";
            return detail::run_validate(config, ctx);
        }
        if (oracle_cmd->parsed()) return oracle::run_checks(out, ctx.seed.value_or(0), nodes) ? 0 : 1;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const FlatTrace& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NoPeak& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NonConvergence& e) {
        err << "non-convergence: " << e.what() << " (residual " << e.residual() << ")\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace wqed
