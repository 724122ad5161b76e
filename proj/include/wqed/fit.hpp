#pragma once

// Bounded least-squares fitting of scan models to traces, with restarts,
// Hessian-based uncertainties and one-parameter profiles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "wqed/config.hpp"
#include "wqed/detector.hpp"
#include "wqed/errors.hpp"
#include "wqed/features.hpp"
#include "wqed/nelder_mead.hpp"
#include "wqed/parallel.hpp"
#include "wqed/scenarios.hpp"

namespace wqed {

/// Quantity of a fittable parameter name, or a ValidationError.
inline Quantity parameter_quantity(const std::string& name) {
    const auto dot = name.find('.');
    const std::string section = name.substr(0, dot);
    const std::string field = dot == std::string::npos ? "" : name.substr(dot + 1);
    if (detail::indexed(section, "emitter")) {
        if (const auto q = emitter_field_quantity(field); q && field != "voltage") return *q;
    } else if (section == "chain" && detail::indexed(field, "phase")) {
        return Quantity::phase;
    } else if (name == "chain.phase_dispersion") {
        return Quantity::dispersion;
    } else if (name == "rf.amplitude" || name == "rf.background") {
        return Quantity::count_rate;
    } else if (name == "scan.omega") {
        return Quantity::rate;
    }
    throw ValidationError("'" + name + "' is not a fittable parameter");
}

/// Reference to the named parameter inside cfg (canonical units).
inline double& parameter_ref(ScanConfig& cfg, const std::string& name) {
    parameter_quantity(name);
    const auto dot = name.find('.');
    const std::string section = name.substr(0, dot);
    const std::string field = name.substr(dot + 1);
    if (const auto id = detail::indexed(section, "emitter")) {
        if (*id > cfg.emitters.size()) throw ValidationError("'" + name + "' names a missing emitter");
        EmitterParams& em = cfg.emitters[*id - 1];
        if (field == "nu0") return em.nu0;
        if (field == "gamma") return em.gamma;
        if (field == "beta") return em.beta;
        if (field == "gamma_d") return em.gamma_d;
        if (field == "sigma_sd") return em.sigma_sd;
        if (field == "dipole_splitting") return em.dipole_splitting;
        if (field == "tuning_slope") return em.tuning_slope;
        if (field == "v_ref") return em.v_ref;
        if (!em.second_beta) em.second_beta = em.beta;
        return *em.second_beta;
    }
    if (name == "chain.phase_dispersion") return cfg.phase_dispersion;
    if (name == "rf.amplitude") return cfg.amplitude;
    if (name == "rf.background") return cfg.background;
    if (name == "scan.omega") return cfg.omega;
    const auto id = *detail::indexed(field, "phase");
    if (id > cfg.phases.size()) throw ValidationError("'" + name + "' names a missing phase");
    PropagationPhase& ph = cfg.phases[id - 1];
    ph.residual = ph.total();
    ph.winding = 0;
    return ph.residual;
}

/// Value in the unit used for reports (GHz for rates, deg for phases).
inline double display_value(const std::string& name, double v) {
    switch (parameter_quantity(name)) {
        case Quantity::rate:
        case Quantity::slope: return angular_to_ghz(v);
        case Quantity::phase: return rad_to_deg(v);
        default: return v;
    }
}

inline std::string display_unit(const std::string& name) {
    switch (parameter_quantity(name)) {
        case Quantity::frequency: return "THz";
        case Quantity::rate: return "GHz";
        case Quantity::slope: return "GHz/V";
        case Quantity::phase: return "deg";
        case Quantity::dispersion: return "ns";
        case Quantity::count_rate: return "counts/s";
        default: return "";
    }
}

struct FreeParameter {
    std::string name;
    double init = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

struct FitOptions {
    int restarts = 5;      // jittered restarts in addition to the start at init
    NelderMeadOptions nm;
    double jitter = 0.3;   // restart spread, in transformed coordinates
    double hessian_step = 1e-4;
    std::uint64_t seed = 0;
    unsigned threads = thread_count();
};

struct FitProblem {
    ScanConfig model;
    std::vector<FreeParameter> free;
    SpectrumTrace data;
    FitOptions options;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> estimates;      // canonical units
    std::vector<double> uncertainties;  // 1 sigma from the chi^2/2 Hessian
    std::vector<std::vector<double>> covariance;
    double chi2 = 0.0;
    double chi2_init = 0.0;
    double chi2_reduced = 0.0;
    std::size_t dof = 0;
    int evaluations = 0;
    int iterations = 0;
    int restarts = 0;
    int best_restart = 0;
    double simplex_size = 0.0;
    bool converged = false;
    bool ill_posed = false;  // Hessian not positive definite: uncertainties unreliable
};

class FitNonConvergence : public NonConvergence {
public:
    FitNonConvergence(const std::string& what, FitResult partial)
        : NonConvergence(what, partial.simplex_size, partial.iterations, {}),
          partial_(std::move(partial)) {}
    const FitResult& partial() const noexcept { return partial_; }

private:
    FitResult partial_;
};

namespace detail {
/// Maps unbounded optimiser coordinates to bounded values.
struct BoundTransform {
    double lo, hi;

    double to_value(double u) const {
        const bool fl = std::isfinite(lo), fh = std::isfinite(hi);
        if (fl && fh) return lo + (hi - lo) / (1.0 + std::exp(-u));
        if (fl) return lo + std::exp(u);
        if (fh) return hi - std::exp(u);
        return u;
    }
    double to_internal(double x) const {
        const bool fl = std::isfinite(lo), fh = std::isfinite(hi);
        if (fl && fh) {
            const double f = (x - lo) / (hi - lo);
            return std::log(f / (1.0 - f));
        }
        if (fl) return std::log(x - lo);
        if (fh) return std::log(hi - x);
        return x;
    }
    double initial_step(double u) const {
        if (std::isfinite(lo) || std::isfinite(hi)) return 0.5;
        return 0.1 * std::abs(u) + 1e-3;
    }
};

/// Copy of value nudged off a bound so the transform stays finite.
inline double inside(double x, double lo, double hi) {
    const double width = std::isfinite(lo) && std::isfinite(hi) ? hi - lo : std::max(1.0, std::abs(x));
    const double eps = 1e-6 * width;
    if (std::isfinite(lo) && x - lo < eps) x = lo + eps;
    if (std::isfinite(hi) && hi - x < eps) x = hi - eps;
    return x;
}

/// Model configuration whose grids follow the data axes.
inline ScanConfig model_on_data_axes(ScanConfig cfg, const SpectrumTrace& data) {
    const auto& a1 = data.axis1;
    auto need = [&](const char* label) {
        if (a1.label != label)
            throw ValidationError(std::string("fit data for '") + std::string(to_string(cfg.kind)) +
                                  "' needs a " + label + " axis, got '" + a1.label + "'");
    };
    switch (cfg.kind) {
        case ScanKind::rt_scan:
        case ScanKind::joint_rt:
            need("freq_thz");
            cfg.frequency = Grid::list(a1.values);
            break;
        case ScanKind::saturation: {
            need("omega_ghz");
            std::vector<double> w;
            for (double g : a1.values) w.push_back(ghz_to_angular(g));
            cfg.omega_grid = Grid::list(w);
            break;
        }
        case ScanKind::voltage_map:
            need("freq_thz");
            if (!data.axis2 || data.axis2->label != "voltage_v")
                throw ValidationError("fit data for 'voltage_map' needs a voltage_v axis");
            cfg.frequency = Grid::list(a1.values);
            cfg.voltage = Grid::list(data.axis2->values);
            break;
        case ScanKind::rf1:
        case ScanKind::rf2:
            need("laser_detuning_ghz");
            cfg.laser_detuning = Grid::list(a1.values);
            if (data.axis2) {
                cfg.emitter_detuning = Grid::list(data.axis2->values);
            } else if (const auto it = data.meta.find("cut.emitter_detuning_ghz"); it != data.meta.end()) {
                double d = 0.0;
                if (!parse_double(it->second, d)) throw ValidationError("bad cut.emitter_detuning_ghz meta");
                cfg.emitter_detuning = Grid::list({d});
            } else if (cfg.emitter_detuning.values().size() != 1) {
                throw ValidationError("1D rf data needs a single emitter detuning in the model");
            }
            break;
    }
    return cfg;
}

inline std::vector<double> data_errors(const SpectrumTrace& data) {
    if (!data.has_uncertainty()) return std::vector<double>(data.values.size(), 1.0);
    const bool all_zero =
        std::all_of(data.uncertainty.begin(), data.uncertainty.end(), [](double e) { return e == 0.0; });
    if (all_zero) return std::vector<double>(data.values.size(), 1.0);
    for (double e : data.uncertainty)
        if (!(e > 0.0) || !std::isfinite(e)) throw ValidationError("fit data errors must be > 0");
    return data.uncertainty;
}

struct Objective {
    ScanConfig base;
    std::vector<std::string> names;
    std::vector<BoundTransform> transforms;
    std::vector<double> y, err;

    std::vector<double> values_of(const std::vector<double>& u) const {
        std::vector<double> x(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) x[i] = transforms[i].to_value(u[i]);
        return x;
    }
    double chi2_at(const std::vector<double>& x) const {
        ScanConfig cfg = base;
        for (std::size_t i = 0; i < x.size(); ++i) parameter_ref(cfg, names[i]) = x[i];
        try {
            cfg.validate();
            const SpectrumTrace m = model_trace(cfg, 1);
            if (m.values.size() != y.size()) throw ValidationError("model/data size mismatch");
            double c = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double r = (y[i] - m.values[i]) / err[i];
                c += r * r;
            }
            return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
        } catch (const ValidationError&) {
            return std::numeric_limits<double>::infinity();
        } catch (const NonConvergence&) {
            return std::numeric_limits<double>::infinity();
        } catch (const FlatTrace&) {
            return std::numeric_limits<double>::infinity();
        }
    }
};

inline Objective make_objective(const FitProblem& p) {
    if (p.data.values.empty()) throw ValidationError("fit data are empty");
    p.data.validate();
    Objective obj;
    obj.base = model_on_data_axes(p.model, p.data);
    obj.y = p.data.values;
    obj.err = data_errors(p.data);
    for (const auto& fp : p.free) {
        parameter_quantity(fp.name);
        if (std::find(obj.names.begin(), obj.names.end(), fp.name) != obj.names.end())
            throw ValidationError("parameter '" + fp.name + "' is listed twice");
        if (!(fp.lower < fp.upper)) throw ValidationError("parameter '" + fp.name + "' has empty bounds");
        if (!(fp.init >= fp.lower && fp.init <= fp.upper))
            throw ValidationError("initial value of '" + fp.name + "' lies outside its bounds");
        obj.names.push_back(fp.name);
        obj.transforms.push_back({fp.lower, fp.upper});
    }
    return obj;
}

/// Hessian of f at x by central differences with relative step h; steps are
/// shortened near bounds, and a parameter sitting on a bound is differenced
/// one step inside it.
template <class F>
Eigen::MatrixXd hessian(F&& f, const std::vector<double>& x, const std::vector<FreeParameter>& fp,
                        double rel) {
    const std::size_t n = x.size();
    std::vector<double> c = x, h(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double width =
            std::isfinite(fp[i].lower) && std::isfinite(fp[i].upper) ? fp[i].upper - fp[i].lower : 1.0;
        // Scale by the start value too, so an estimate sitting on a bound at 0 keeps a usable step.
        const double scale = std::max(std::abs(x[i]), std::abs(fp[i].init));
        h[i] = rel * (scale > 0.0 ? scale : width);
        const double room = std::min(x[i] - fp[i].lower, fp[i].upper - x[i]);
        if (room < h[i]) {
            if (room > 0.25 * h[i]) {
                h[i] = room;
            } else {
                c[i] = x[i] - fp[i].lower < fp[i].upper - x[i] ? fp[i].lower + h[i] : fp[i].upper - h[i];
            }
        }
    }
    auto at = [&](std::size_t i, double si, std::size_t j, double sj) {
        std::vector<double> p = c;
        p[i] += si * h[i];
        p[j] += sj * h[j];
        return f(p);
    };
    const double f0 = f(c);
    Eigen::MatrixXd H(static_cast<long>(n), static_cast<long>(n));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> p = c, m = c;
        p[i] += h[i];
        m[i] -= h[i];
        H(static_cast<long>(i), static_cast<long>(i)) = (f(p) - 2.0 * f0 + f(m)) / (h[i] * h[i]);
        for (std::size_t j = 0; j < i; ++j) {
            const double v =
                (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) / (4.0 * h[i] * h[j]);
            H(static_cast<long>(i), static_cast<long>(j)) = v;
            H(static_cast<long>(j), static_cast<long>(i)) = v;
        }
    }
    return H;
}
}  // namespace detail

/// Minimises chi^2 = sum((data - model)/err)^2 over the free parameters.
inline FitResult fit(const FitProblem& problem) {
    const detail::Objective obj = detail::make_objective(problem);
    const std::size_t n = obj.names.size();
    if (n == 0) throw ValidationError("fit needs at least one free parameter");
    if (obj.y.size() < 2 * n)
        throw ValidationError("fit needs at least twice as many data points as free parameters");
    {
        const auto [lo, hi] = std::minmax_element(obj.y.begin(), obj.y.end());
        const bool measured = std::any_of(problem.data.uncertainty.begin(), problem.data.uncertainty.end(),
                                          [](double e) { return e != 0.0; });
        const double noise = measured ? detail::median(obj.err) : noise_estimate(obj.y);
        if (!(*hi - *lo > 3.0 * noise)) throw ValidationError("fit data are flat within their noise");
    }
    if (problem.options.restarts < 0) throw ValidationError("fit restarts must be >= 0");

    std::vector<double> u0(n), steps(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& fp = problem.free[i];
        u0[i] = obj.transforms[i].to_internal(detail::inside(fp.init, fp.lower, fp.upper));
        steps[i] = obj.transforms[i].initial_step(u0[i]);
    }
    auto f = [&](const std::vector<double>& u) { return obj.chi2_at(obj.values_of(u)); };

    const std::size_t runs = static_cast<std::size_t>(problem.options.restarts) + 1;
    std::vector<NelderMeadResult> results(runs);
    std::vector<int> evals(runs, 0);
    parallel_for(
        runs,
        [&](std::size_t r) {
            std::vector<double> start = u0;
            if (r > 0) {
                auto eng = keyed_engine(problem.options.seed, r, 7);
                std::normal_distribution<double> jitter(0.0, problem.options.jitter);
                for (std::size_t i = 0; i < n; ++i)
                    start[i] += jitter(eng) * std::max(1.0, steps[i] / 0.5);
            }
            NelderMeadResult first = nelder_mead(f, start, steps, problem.options.nm);
            NelderMeadResult polish = nelder_mead(f, first.x, steps, problem.options.nm);
            polish.evaluations += first.evaluations;
            polish.iterations += first.iterations;
            polish.converged = polish.converged || first.converged;
            if (first.f < polish.f) {
                first.evaluations = polish.evaluations;
                first.iterations = polish.iterations;
                first.converged = polish.converged;
                polish = first;
            }
            results[r] = std::move(polish);
        },
        problem.options.threads);

    std::size_t best = 0;
    int total_evals = 0, total_iter = 0;
    bool any_converged = false;
    for (std::size_t r = 0; r < runs; ++r) {
        total_evals += results[r].evaluations;
        total_iter += results[r].iterations;
        any_converged = any_converged || results[r].converged;
        if (results[r].f < results[best].f) best = r;
    }

    FitResult res;
    res.names = obj.names;
    res.estimates = obj.values_of(results[best].x);
    res.chi2 = results[best].f;
    res.chi2_init = obj.chi2_at(obj.values_of(u0));
    if (res.chi2_init < res.chi2) {
        res.estimates = obj.values_of(u0);
        res.chi2 = res.chi2_init;
    }
    res.dof = obj.y.size() - n;
    res.chi2_reduced = res.chi2 / static_cast<double>(res.dof);
    res.evaluations = total_evals;
    res.iterations = total_iter;
    res.restarts = problem.options.restarts;
    res.best_restart = static_cast<int>(best);
    res.simplex_size = results[best].simplex_size;
    res.converged = any_converged && std::isfinite(res.chi2);

    const Eigen::MatrixXd H =
        0.5 * detail::hessian([&](const std::vector<double>& x) { return obj.chi2_at(x); }, res.estimates,
                              problem.free, problem.options.hessian_step);
    Eigen::MatrixXd cov(static_cast<long>(n), static_cast<long>(n));
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (H.allFinite() && llt.info() == Eigen::Success) {
        cov = llt.solve(Eigen::MatrixXd::Identity(static_cast<long>(n), static_cast<long>(n)));
    } else {
        res.ill_posed = true;
        cov.setZero();
        if (H.allFinite()) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
            const double cutoff = 1e-12 * es.eigenvalues().cwiseAbs().maxCoeff();
            for (long k = 0; k < static_cast<long>(n); ++k) {
                const double ev = es.eigenvalues()(k);
                if (ev > cutoff) cov += es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose() / ev;
            }
        }
    }
    res.covariance.assign(n, std::vector<double>(n));
    res.uncertainties.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            res.covariance[i][j] = cov(static_cast<long>(i), static_cast<long>(j));
        res.uncertainties[i] = std::sqrt(std::max(0.0, res.covariance[i][i]));
    }
    if (!res.converged) throw FitNonConvergence("simplex did not converge in any restart", res);
    return res;
}

struct ProfilePoint {
    double value = 0.0;
    double chi2 = 0.0;
    bool converged = false;
};

/// chi^2 minimised over the remaining free parameters with `name` held at
/// each grid value.
inline std::vector<ProfilePoint> profile_parameter(const FitProblem& problem, const std::string& name,
                                                   const std::vector<double>& grid) {
    const auto it = std::find_if(problem.free.begin(), problem.free.end(),
                                 [&](const FreeParameter& p) { return p.name == name; });
    if (it == problem.free.end()) throw ValidationError("profile parameter '" + name + "' is not free");
    for (double v : grid)
        if (!(v >= it->lower && v <= it->upper))
            throw ValidationError("profile grid leaves the bounds of '" + name + "'");
    std::vector<ProfilePoint> out(grid.size());
    parallel_for(
        grid.size(),
        [&](std::size_t g) {
            FitProblem p = problem;
            p.free.erase(p.free.begin() + (it - problem.free.begin()));
            parameter_ref(p.model, name) = grid[g];
            p.options.threads = 1;
            out[g].value = grid[g];
            if (p.free.empty()) {
                const auto obj = detail::make_objective(p);
                out[g].chi2 = obj.chi2_at({});
                out[g].converged = true;
                return;
            }
            try {
                const FitResult r = fit(p);
                out[g].chi2 = r.chi2;
                out[g].converged = true;
            } catch (const FitNonConvergence& e) {
                out[g].chi2 = e.partial().chi2;
            }
        },
        problem.options.threads);
    return out;
}

/// Free parameters from `free.<name> = <init> in <lo> .. <hi>` entries, with
/// values in the parameter's units; `inf` / `-inf` leave a side open.
inline std::vector<FreeParameter> free_parameters_from(const KeyValues& kv) {
    std::vector<FreeParameter> out;
    for (const auto& [key, value] : kv) {
        if (key.rfind("free.", 0) != 0) continue;
        const std::string name = key.substr(5);
        const Quantity q = parameter_quantity(name);
        const auto in = value.find(" in ");
        const auto dots = value.find("..");
        if (in == std::string::npos || dots == std::string::npos || dots < in)
            throw ValidationError("key '" + key + "': expected '<init> in <lower> .. <upper>'");
        auto bound = [&](std::string text) {
            text = detail::trim(text);
            constexpr double inf = std::numeric_limits<double>::infinity();
            if (text == "inf" || text == "+inf") return inf;
            if (text == "-inf") return -inf;
            return parse_quantity(text, q, key);
        };
        FreeParameter fp;
        fp.name = name;
        fp.init = parse_quantity(value.substr(0, in), q, key);
        fp.lower = bound(value.substr(in + 4, dots - in - 4));
        fp.upper = bound(value.substr(dots + 2));
        out.push_back(fp);
    }
    return out;
}

inline FitOptions fit_options_from(const KeyValues& kv, std::uint64_t seed) {
    FitOptions o;
    o.seed = seed;
    if (const auto it = kv.find("fit.restarts"); it != kv.end())
        o.restarts = static_cast<int>(detail::parse_int(it->second, "fit.restarts"));
    if (const auto it = kv.find("fit.max_evals"); it != kv.end())
        o.nm.max_evals = static_cast<int>(detail::parse_int(it->second, "fit.max_evals"));
    if (o.restarts < 0) throw ValidationError("key 'fit.restarts': must be >= 0");
    if (o.nm.max_evals < 10) throw ValidationError("key 'fit.max_evals': must be >= 10");
    return o;
}

}  // namespace wqed
