#pragma once

// Gaussian spectral-diffusion averaging by Gauss-Hermite quadrature.

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "wqed/errors.hpp"

namespace wqed {

/// Nodes and weights for E[f(X)], X ~ N(0, 1); weights sum to one.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {
// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
inline GaussHermiteRule compute_gauss_hermite(int n) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussHermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = solver.eigenvalues()(i);
        const double v = solver.eigenvectors()(0, i);
        rule.weights[i] = v * v;
    }
    // Symmetrise so that the rule is exactly even and the middle node is 0.
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    double sum = 0.0;
    for (double w : rule.weights) sum += w;
    for (double& w : rule.weights) w /= sum;
    return rule;
}
}  // namespace detail

/// Cached rule; nodes must be odd and >= 3.
inline const GaussHermiteRule& gauss_hermite_rule(int nodes) {
    if (nodes < 3 || nodes % 2 == 0)
        throw ValidationError("Gauss-Hermite node count must be odd and >= 3");
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<GaussHermiteRule>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[nodes];
    if (!slot) slot = std::make_unique<GaussHermiteRule>(detail::compute_gauss_hermite(nodes));
    return *slot;
}

/// T_obs(delta) = sum_k w_k T(delta - sigma x_k). sigma = 0 returns the
/// generator unchanged.
template <class Generator>
auto spectral_diffusion_convolve(Generator generator, double sigma, int nodes = 21) {
    if (sigma < 0.0) throw ValidationError("spectral diffusion sigma must be >= 0");
    const GaussHermiteRule& rule = gauss_hermite_rule(nodes);
    return [generator = std::move(generator), sigma, &rule](double delta) {
        if (sigma == 0.0) return static_cast<double>(generator(delta));
        double acc = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k)
            acc += rule.weights[k] * generator(delta - sigma * rule.nodes[k]);
        return acc;
    };
}

/// Tensor-product average over independent Gaussian resonance shifts, one
/// per entry of sigmas. f receives the shift vector (rad/ns).
template <class F>
double diffusion_average(std::span<const double> sigmas, int nodes, F&& f) {
    const std::size_t dims = sigmas.size();
    std::vector<double> shifts(dims, 0.0);
    std::vector<std::size_t> active;
    for (std::size_t d = 0; d < dims; ++d)
        if (sigmas[d] > 0.0) active.push_back(d);
    if (active.empty()) return f(std::span<const double>(shifts));

    const GaussHermiteRule& rule = gauss_hermite_rule(nodes);
    const std::size_t n = rule.nodes.size();
    std::vector<std::size_t> idx(active.size(), 0);
    double acc = 0.0;
    while (true) {
        double w = 1.0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            shifts[active[a]] = sigmas[active[a]] * rule.nodes[idx[a]];
            w *= rule.weights[idx[a]];
        }
        acc += w * f(std::span<const double>(shifts));
        std::size_t a = 0;
        while (a < active.size() && ++idx[a] == n) idx[a++] = 0;
        if (a == active.size()) break;
    }
    return acc;
}

}  // namespace wqed
