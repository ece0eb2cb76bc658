#pragma once

#include "hsil/estimator.hpp"
#include "hsil/forward.hpp"
#include "hsil/noise.hpp"

#include <cstdint>
#include <vector>

namespace hsil {

/// Standardized error-analysis quantities at level lambda:
///   theta_z  = ||(T_nu + lambda)^{-1/2} S_x^* (S_x A(f_rho) - y)||_{H'}
///   psi_x    = ||(T_nu + lambda)^{-1/2} (T_nu - T_x)||  (operator norm)
///   psi_x_hs = the same map in Hilbert-Schmidt norm
///   gamma_x  = ||(T_x + lambda)^{-1/2} (T_nu + lambda)^{1/2}||
struct StandardizedQuantities {
    double theta_z = 0.0;
    double psi_x = 0.0;
    double psi_x_hs = 0.0;
    double gamma_x = 0.0;
    double lambda = 0.0;
};

StandardizedQuantities compute_standardized(const ForwardOp& op, const Sample& sample,
                                            const CoefVector& f_rho, double lambda);

struct PropositionA1Bounds {
    double theta_bound = 0.0;   // 2 (kappa M / (m sqrt(lambda)) + sqrt(Sigma^2 N/m)) log(2/eta)
    double psi_hs_bound = 0.0;  // 2 (kappa^2 / (m sqrt(lambda)) + sqrt(kappa^2 N/m)) log(2/eta)
};

PropositionA1Bounds proposition_a1_bounds(long m, double lambda, double eta, double m_scale,
                                          double sigma_bound, double kappa, double n_lambda);

struct PropositionA2Bounds {
    double psi_hs_bound = 0.0;       // sqrt(lambda) 2 kappa (2 kappa + 1) log(2/eta)
    double gamma_power_bound = 0.0;  // ((2 kappa + 1)^2 log(2/eta))^{2s}
};

PropositionA2Bounds proposition_a2_bounds(double lambda, double eta, double kappa, double s);

struct ConcentrationRow {
    double theta_z = 0.0;
    double psi_x = 0.0;
    double psi_x_hs = 0.0;
    double gamma_x = 0.0;
};

struct QuantileCheck {
    double quantile = 0.0;
    double bound = 0.0;
    bool ok = false;
    double slack = 0.0;
};

struct ConcentrationReport {
    std::vector<ConcentrationRow> rows;
    QuantileCheck theta_a1;
    QuantileCheck psi_hs_a1;
    QuantileCheck psi_hs_a2;
    QuantileCheck gamma_a2;
    bool condition_31_ok = false;
    long m = 0;
    double lambda = 0.0;
    double eta = 0.0;
    double kappa = 0.0;
    double n_lambda = 0.0;

    bool all_ok() const {
        return theta_a1.ok && psi_hs_a1.ok && psi_hs_a2.ok && gamma_a2.ok;
    }
};

/// Draws independent samples at f_rho, computes the standardized quantities
/// per trial, and compares empirical (1-eta)-quantiles against the
/// proposition bounds evaluated with the certified noise pair, exact kappa
/// and exact N(lambda).
ConcentrationReport concentration_study(const ForwardOp& op, const KernelView& kv,
                                        const NoiseModel& noise, const CoefVector& f_rho, long m,
                                        double lambda, int trials, double eta,
                                        std::uint64_t root_seed, int threads = 0);

/// Empirical (1-eta)-quantile by order statistic (lowest index covering the
/// requested probability mass).
double empirical_quantile(std::vector<double> values, double prob);

}  // namespace hsil
