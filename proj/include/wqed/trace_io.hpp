#pragma once

// CSV and JSON forms of SpectrumTrace.
//
// CSV: `# key=value` metadata lines, one header row, then data rows. 1D
// traces have columns `<axis1>,<value>[,stderr]`; 2D maps are written in long
// form `<axis2>,<axis1>,<value>[,stderr]` with axis2 as the outer loop.

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wqed/config.hpp"
#include "wqed/errors.hpp"
#include "wqed/format.hpp"
#include "wqed/trace.hpp"
#include "wqed/units.hpp"

namespace wqed {

/// Axis columns understood on input; freq_ghz is converted to freq_thz.
inline bool is_axis_column(const std::string& name) {
    static const char* names[] = {"freq_thz",  "freq_ghz", "omega_ghz", "voltage_v",
                                  "laser_detuning_ghz", "emitter_detuning_ghz"};
    return std::find_if(std::begin(names), std::end(names), [&](const char* n) { return name == n; }) !=
           std::end(names);
}

inline std::string trace_to_csv(const SpectrumTrace& tr) {
    tr.validate();
    std::ostringstream out;
    out << "# trace.kind=" << tr.kind << "\n";
    for (const auto& [k, v] : tr.meta) out << "# " << k << "=" << v << "\n";
    const bool err = tr.has_uncertainty();
    if (tr.axis2) out << tr.axis2->label << ",";
    out << tr.axis1.label << "," << tr.value_label << (err ? ",stderr" : "") << "\n";
    for (std::size_t r = 0; r < tr.rows(); ++r) {
        for (std::size_t c = 0; c < tr.cols(); ++c) {
            const std::size_t i = r * tr.cols() + c;
            if (tr.axis2) out << format_double(tr.axis2->values[r]) << ",";
            out << format_double(tr.axis1.values[c]) << "," << format_double(tr.values[i]);
            if (err) out << "," << format_double(tr.uncertainty[i]);
            out << "\n";
        }
    }
    return out.str();
}

namespace detail {
inline std::vector<double> unique_in_order(const std::vector<double>& v) {
    std::vector<double> out;
    for (double x : v)
        if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
    return out;
}
}  // namespace detail

inline SpectrumTrace trace_from_csv(const std::string& text, const std::string& source = "trace") {
    SpectrumTrace tr;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    std::vector<std::vector<double>> cols;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = source + ":" + std::to_string(line_no);
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (!header.empty()) throw ValidationError(where + ": metadata after the header row");
            const std::string body = detail::trim(std::string_view(line).substr(1));
            const auto eq = body.find('=');
            if (eq == std::string::npos) continue;  // free-text comment
            const std::string key = body.substr(0, eq);
            const std::string value = body.substr(eq + 1);
            if (key == "trace.kind") tr.kind = value;
            else tr.meta[key] = value;
            continue;
        }
        const auto fields = detail::split(line, ',');
        if (header.empty()) {
            header = fields;
            cols.assign(header.size(), {});
            continue;
        }
        if (fields.size() != header.size())
            throw ValidationError(where + ": expected " + std::to_string(header.size()) + " columns, got " +
                                  std::to_string(fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v) || !std::isfinite(v))
                throw ValidationError(where + ": column '" + header[c] + "' has non-numeric or non-finite value '" +
                                      fields[c] + "'");
            cols[c].push_back(v);
        }
    }
    if (header.empty()) throw ValidationError(source + ": missing header row");

    std::vector<std::size_t> axes;
    std::size_t value_col = header.size(), err_col = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (is_axis_column(header[c])) axes.push_back(c);
        else if (header[c] == "stderr") err_col = c;
        else if (value_col == header.size()) value_col = c;
        else throw ValidationError(source + ": unexpected column '" + header[c] + "'");
    }
    if (axes.empty())
        throw ValidationError(source + ": missing required axis column (freq_thz, freq_ghz, omega_ghz, "
                                       "voltage_v, laser_detuning_ghz or emitter_detuning_ghz)");
    if (axes.size() > 2) throw ValidationError(source + ": more than two axis columns");
    if (value_col == header.size()) throw ValidationError(source + ": missing required value column");
    if (cols[0].empty()) throw ValidationError(source + ": no data rows");

    auto convert = [](const std::string& label, std::vector<double>& v) {
        if (label != "freq_ghz") return label;
        for (double& x : v) x /= thz_to_ghz;
        return std::string("freq_thz");
    };
    tr.value_label = header[value_col];
    tr.values = cols[value_col];
    if (err_col != header.size()) tr.uncertainty = cols[err_col];
    if (axes.size() == 1) {
        tr.axis1.label = convert(header[axes[0]], cols[axes[0]]);
        tr.axis1.values = cols[axes[0]];
    } else {
        // Long form: first axis column is the outer index.
        const std::size_t outer = axes[0], inner = axes[1];
        Axis a2{convert(header[outer], cols[outer]), detail::unique_in_order(cols[outer])};
        Axis a1{convert(header[inner], cols[inner]), detail::unique_in_order(cols[inner])};
        if (a1.values.size() * a2.values.size() != tr.values.size())
            throw ValidationError(source + ": 2D data do not form a complete grid");
        for (std::size_t i = 0; i < tr.values.size(); ++i)
            if (cols[outer][i] != a2.values[i / a1.values.size()] || cols[inner][i] != a1.values[i % a1.values.size()])
                throw ValidationError(source + ": 2D rows are not in grid order (line " +
                                      std::to_string(i + 1) + " of the data)");
        tr.axis1 = std::move(a1);
        tr.axis2 = std::move(a2);
    }
    if (tr.kind.empty()) tr.kind = "external";
    tr.validate();
    return tr;
}

inline nlohmann::ordered_json trace_to_json(const SpectrumTrace& tr) {
    tr.validate();
    nlohmann::ordered_json j;
    j["kind"] = tr.kind;
    j["axis1"] = {{"label", tr.axis1.label}, {"values", tr.axis1.values}};
    if (tr.axis2) j["axis2"] = {{"label", tr.axis2->label}, {"values", tr.axis2->values}};
    j["value_label"] = tr.value_label;
    j["values"] = tr.values;
    if (tr.has_uncertainty()) j["stderr"] = tr.uncertainty;
    j["meta"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : tr.meta) j["meta"][k] = v;
    return j;
}

inline SpectrumTrace trace_from_json(const nlohmann::json& j) {
    try {
        SpectrumTrace tr;
        tr.kind = j.at("kind").get<std::string>();
        tr.axis1.label = j.at("axis1").at("label").get<std::string>();
        tr.axis1.values = j.at("axis1").at("values").get<std::vector<double>>();
        if (j.contains("axis2"))
            tr.axis2 = Axis{j["axis2"].at("label").get<std::string>(),
                            j["axis2"].at("values").get<std::vector<double>>()};
        tr.value_label = j.at("value_label").get<std::string>();
        tr.values = j.at("values").get<std::vector<double>>();
        if (j.contains("stderr")) tr.uncertainty = j["stderr"].get<std::vector<double>>();
        if (j.contains("meta"))
            for (const auto& [k, v] : j["meta"].items()) tr.meta[k] = v.get<std::string>();
        tr.validate();
        return tr;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed trace JSON: ") + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
    if (!f) throw Error("failed writing '" + path + "'");
}

/// Reads a trace from CSV, or JSON when the path ends in .json.
inline SpectrumTrace read_trace(const std::string& path) {
    const std::string text = read_text_file(path);
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ": " + e.what());
        }
        return trace_from_json(j);
    }
    return trace_from_csv(text, path);
}

inline SpectrumTrace read_trace_csv(const std::string& path) {
    return trace_from_csv(read_text_file(path), path);
}

inline void write_trace_csv(const std::string& path, const SpectrumTrace& tr) {
    write_text_file(path, trace_to_csv(tr));
}

inline void write_trace_json(const std::string& path, const SpectrumTrace& tr) {
    write_text_file(path, trace_to_json(tr).dump(2) + "\n");
}

}  // namespace wqed
