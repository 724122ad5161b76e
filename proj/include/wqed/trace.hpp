#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wqed/errors.hpp"
#include "wqed/format.hpp"

namespace wqed {

/// Ordered string key/value record; enough to regenerate the trace.
using Meta = std::map<std::string, std::string>;

struct Axis {
    std::string label;  // column name, e.g. "freq_thz"
    std::vector<double> values;
};

/// Model or measured values on a 1D grid, or a 2D grid stored row-major with
/// axis2 as the outer index.
struct SpectrumTrace {
    std::string kind;
    Axis axis1;
    std::optional<Axis> axis2;
    std::string value_label;
    std::vector<double> values;
    std::vector<double> uncertainty;  // empty when not attached
    Meta meta;

    std::size_t rows() const { return axis2 ? axis2->values.size() : 1; }
    std::size_t cols() const { return axis1.values.size(); }
    double at(std::size_t i1, std::size_t i2 = 0) const { return values[i2 * cols() + i1]; }
    bool has_uncertainty() const { return !uncertainty.empty(); }

    void validate() const {
        auto monotonic = [](const std::vector<double>& v) {
            for (std::size_t i = 1; i < v.size(); ++i)
                if (!(v[i] > v[i - 1])) return false;
            return true;
        };
        if (axis1.values.empty()) throw ValidationError("trace axis is empty");
        if (!monotonic(axis1.values))
            throw ValidationError("trace axis '" + axis1.label + "' is not strictly increasing");
        if (axis2 && !monotonic(axis2->values))
            throw ValidationError("trace axis '" + axis2->label + "' is not strictly increasing");
        if (values.size() != rows() * cols())
            throw ValidationError("trace value count does not match its axes");
        if (!uncertainty.empty() && uncertainty.size() != values.size())
            throw ValidationError("trace uncertainty count does not match its values");
        for (double v : values)
            if (!std::isfinite(v)) throw ValidationError("trace values must be finite");
    }
};

/// 1D cut along axis1 at row index i2 of a 2D map.
inline SpectrumTrace cross_section(const SpectrumTrace& map, std::size_t i2) {
    if (!map.axis2) throw ValidationError("cross_section needs a 2D trace");
    if (i2 >= map.rows()) throw ValidationError("cross_section row out of range");
    SpectrumTrace cut;
    cut.kind = map.kind;
    cut.axis1 = map.axis1;
    cut.value_label = map.value_label;
    cut.meta = map.meta;
    cut.meta["cut." + map.axis2->label] = format_double(map.axis2->values[i2]);
    const std::size_t n = map.cols();
    cut.values.assign(map.values.begin() + static_cast<long>(i2 * n),
                      map.values.begin() + static_cast<long>((i2 + 1) * n));
    if (map.has_uncertainty())
        cut.uncertainty.assign(map.uncertainty.begin() + static_cast<long>(i2 * n),
                               map.uncertainty.begin() + static_cast<long>((i2 + 1) * n));
    return cut;
}

/// Row of a 2D map whose axis2 value is closest to value.
inline SpectrumTrace cross_section_at(const SpectrumTrace& map, double value) {
    if (!map.axis2) throw ValidationError("cross_section needs a 2D trace");
    std::size_t best = 0;
    for (std::size_t i = 1; i < map.axis2->values.size(); ++i)
        if (std::abs(map.axis2->values[i] - value) < std::abs(map.axis2->values[best] - value))
            best = i;
    return cross_section(map, best);
}

}  // namespace wqed
