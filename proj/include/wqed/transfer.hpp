#pragma once

#include <array>
#include <cmath>

#include "wqed/emitter.hpp"
#include "wqed/errors.hpp"
#include "wqed/units.hpp"

namespace wqed {

/// Maps (right-going, left-going) amplitudes on the left of an element to
/// those on its right.
struct TransferMatrix {
    std::array<cplx, 4> m{cplx{1.0}, cplx{0.0}, cplx{0.0}, cplx{1.0}};

    cplx& operator()(int row, int col) { return m[2 * row + col]; }
    const cplx& operator()(int row, int col) const { return m[2 * row + col]; }

    cplx det() const { return m[0] * m[3] - m[1] * m[2]; }

    friend TransferMatrix operator*(const TransferMatrix& a, const TransferMatrix& b) {
        TransferMatrix c;
        c(0, 0) = a(0, 0) * b(0, 0) + a(0, 1) * b(1, 0);
        c(0, 1) = a(0, 0) * b(0, 1) + a(0, 1) * b(1, 1);
        c(1, 0) = a(1, 0) * b(0, 0) + a(1, 1) * b(1, 0);
        c(1, 1) = a(1, 0) * b(0, 1) + a(1, 1) * b(1, 1);
        return c;
    }
};

inline TransferMatrix emitter_transfer_matrix(const ScatterAmplitudes& amps) {
    if (std::abs(amps.t) < 1e-12)
        throw ValidationError("transfer matrix undefined for |t| < 1e-12 (perfect extinction)");
    const cplx inv_t = 1.0 / amps.t;
    TransferMatrix tm;
    tm(0, 0) = (amps.t * amps.t - amps.r * amps.r) * inv_t;
    tm(0, 1) = amps.r * inv_t;
    tm(1, 0) = -amps.r * inv_t;
    tm(1, 1) = inv_t;
    return tm;
}

inline TransferMatrix propagation_matrix(double phi) {
    TransferMatrix tm;
    tm(0, 0) = std::polar(1.0, phi);
    tm(1, 1) = std::polar(1.0, -phi);
    return tm;
}

/// Left-incidence transmission and reflection of a composed element.
inline ScatterAmplitudes amplitudes_from_transfer(const TransferMatrix& tm) {
    return {tm.det() / tm(1, 1), -tm(1, 0) / tm(1, 1)};
}

}  // namespace wqed
