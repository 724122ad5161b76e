#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wqed {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters, configuration or input files. Maps to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance. Maps to exit code 3.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double residual, int iterations,
                   std::vector<std::complex<double>> last_iterate = {})
        : Error(what), residual_(residual), iterations_(iterations),
          last_iterate_(std::move(last_iterate)) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }
    const std::vector<std::complex<double>>& last_iterate() const noexcept {
        return last_iterate_;
    }

private:
    double residual_;
    int iterations_;
    std::vector<std::complex<double>> last_iterate_;
};

/// Trace has no dip distinguishable from its noise.
class FlatTrace : public Error {
public:
    using Error::Error;
};

/// Trace has no peak or dip whose half-level crossings can be located.
class NoPeak : public Error {
public:
    using Error::Error;
};

}  // namespace wqed
