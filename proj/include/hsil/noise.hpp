#pragma once

#include <nlohmann/json_fwd.hpp>

#include <random>

namespace hsil {

/// Centered observation noise with a certified Bernstein pair (M, Sigma):
/// int (e^{|eps|/M} - |eps|/M - 1) drho <= Sigma^2 / (2 M^2).
struct NoiseModel {
    enum class Kind { gaussian, bounded_uniform };

    Kind kind = Kind::gaussian;
    double sigma = 0.1;          // std dev (gaussian) or half-width (bounded_uniform)
    double bernstein_m = 0.4;    // certified M
    double bernstein_sigma = 0.2;  // certified Sigma

    static NoiseModel from_json(const nlohmann::json& js);
    nlohmann::json to_json() const;
};

double sample_noise(const NoiseModel& model, std::mt19937_64& rng);

struct BernsteinCertificate {
    bool holds = false;
    double integral = 0.0;  // left-hand side
    double budget = 0.0;    // Sigma^2 / (2 M^2)
    double slack = 0.0;     // budget - integral
};

/// Evaluates the Bernstein integral (closed form for bounded noise, adaptive
/// quadrature for gaussian) against the budget for the proposed pair.
BernsteinCertificate certify_bernstein(const NoiseModel& model, double m_scale, double sigma_bound);

}  // namespace hsil
