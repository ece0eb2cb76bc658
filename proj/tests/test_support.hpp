#pragma once

#include "hsil/rng.hpp"
#include "hsil/testbed.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>

namespace hsil::test {

// Composite 16-point Gauss-Legendre quadrature on [0,1]. Independent of the
// pseudo-spectral path used by the library (different nodes, different rule),
// so it can serve as an oracle for projections and inner products.
inline double gauss_legendre(const std::function<double(double)>& f, int panels = 64) {
    // Nodes/weights for [-1, 1], 16 points.
    static const std::array<double, 8> x = {
        0.0950125098376374401853193, 0.2816035507792589132304605,
        0.4580167776572273863424194, 0.6178762444026437484466718,
        0.7554044083550030338951012, 0.8656312023878317438804679,
        0.9445750230732325760779884, 0.9894009349916499325961542};
    static const std::array<double, 8> w = {
        0.1894506104550684962853967, 0.1826034150449235888667637,
        0.1691565193950025381893121, 0.1495959888165767320815017,
        0.1246289712555338720524763, 0.0951585116824927848099251,
        0.0622535239386478928628438, 0.0271524594117540948517806};
    double total = 0.0;
    const double h = 1.0 / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h;
        double acc = 0.0;
        for (int i = 0; i < 8; ++i)
            acc += w[i] * (f(mid + 0.5 * h * x[i]) + f(mid - 0.5 * h * x[i]));
        total += 0.5 * h * acc;
    }
    return total;
}

inline Eigen::VectorXd random_coeffs(int n, std::mt19937_64& rng, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * normal01(rng);
    return v;
}

inline double eval_h_function(const TestbedSpec& spec, const Eigen::VectorXd& coeffs, double x) {
    double acc = 0.0;
    for (int j = 1; j <= spec.n; ++j) acc += coeffs[j - 1] * basis_eval(spec, j, x);
    return acc;
}

}  // namespace hsil::test
