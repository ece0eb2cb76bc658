#pragma once

#include "hsil/testbed.hpp"

#include <Eigen/Core>

#include <random>
#include <vector>

namespace hsil {

/// Kernel K(x,x') = sum_j mu_j phi_j(x) phi_j(x') with realized eigenvalues.
struct KernelView {
    TestbedSpec spec;
    Eigen::VectorXd mu;

    static KernelView make(const TestbedSpec& spec);
};

double kernel_eval(const KernelView& kv, double x, double xp);

/// sup_x K(x,x) evaluated on a fine grid, together with the certified series
/// bound mu_1 + 2 sum_{j>=2} mu_j (|phi_j|^2 <= 2 for the trigonometric basis).
struct KappaSq {
    double grid_sup = 0.0;
    double series_bound = 0.0;
};
KappaSq kappa_sq(const KernelView& kv, int grid_points = 4096);

/// Design points with the precomputed feature table phi_j(x_i).
struct DesignPoints {
    Eigen::VectorXd x;
    Eigen::MatrixXd features;  // m x n

    static DesignPoints make(const TestbedSpec& spec, Eigen::VectorXd x);
    Eigen::Index m() const { return x.size(); }
};

DesignPoints sample_uniform_design(const TestbedSpec& spec, Eigen::Index m, std::mt19937_64& rng);

/// S_x g = (g(x_1), ..., g(x_m)) for g given in Hprime coordinates.
Eigen::VectorXd sampling_apply(const DesignPoints& dp, const KernelView& kv, const CoefVector& g);

/// Adjoint w.r.t. the empirical inner product <u,v>_m = (1/m) sum u_i v_i:
/// S_x* c = (1/m) sum_i K_{x_i} c_i, returned in Hprime coordinates.
CoefVector sampling_adjoint(const DesignPoints& dp, const KernelView& kv, const Eigen::VectorXd& c);

/// T_nu in Hprime coordinates is exactly diag(mu) on this testbed.
Eigen::VectorXd covariance_population(const KernelView& kv);

/// T_x = S_x* S_x, entries (1/m) sum_i sqrt(mu_j mu_k) phi_j(x_i) phi_k(x_i).
Eigen::MatrixXd covariance_empirical(const DesignPoints& dp, const KernelView& kv);

/// N(lambda) = sum_j mu_j / (lambda + mu_j).
double effective_dimension(const Eigen::VectorXd& mu, double lambda);

/// Trace of (T + lambda)^{-1} T for a dense symmetric T; general path for
/// non-diagonal covariances.
double effective_dimension_dense(const Eigen::MatrixXd& t_op, double lambda);

enum class DecayRegime { polynomial, logarithmic, neither };

struct DecayFit {
    DecayRegime regime = DecayRegime::neither;
    double b_hat = 0.0;   // polynomial: N(lambda) ~ c lambda^{-b_hat}
    double c_hat = 0.0;
    double r2_poly = 0.0;
    double r2_log = 0.0;
};

/// Fits log N against -b log(lambda) (polynomial) and against
/// log log(1/lambda) (logarithmic); declares a regime only above R^2 = 0.98.
DecayFit classify_decay(const Eigen::VectorXd& mu, const std::vector<double>& lambda_grid);

/// Log-spaced grid of `count` values from lo to hi inclusive.
std::vector<double> log_lambda_grid(double lo, double hi, int count);

}  // namespace hsil
