#pragma once

#include "hsil/forward.hpp"
#include "hsil/rkhs.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace hsil {

struct Sample {
    DesignPoints dp;
    Eigen::VectorXd y;
};

struct SolveOptions {
    double tol = 1e-9;            // relative coefficient-change stopping rule
    int max_iter = 50;
    int max_restarts = 3;         // extra attempts when the first run stalls
    double restart_radius = 0.5;  // H-norm of the start perturbation
    std::uint64_t restart_seed = 0x5eedULL;
    double penalty_a = -1.0;      // exponent of the penalty operator; <0 uses spec.a
    double step_floor = 1e-8;
    double cond_limit = 1e14;
};

struct SolveResult {
    CoefVector f_hat;
    int iterations = 0;
    std::vector<double> objective_trace;  // non-increasing across accepted steps
    bool converged = false;
    double lambda = 0.0;
    double objective = 0.0;
    int restarts = 0;
};

/// (1/m) sum_i (A(f)(x_i) - y_i)^2 + lambda ||L_pen (f - f_bar)||^2.
double objective(const ForwardOp& op, const Sample& sample, const CoefVector& f,
                 const CoefVector& f_bar, double lambda, double penalty_a = -1.0);

/// One Gauss-Newton subproblem: minimizes the objective with A linearized at
/// f_k. Solves the n x n regularized normal equations by LDLT with one step
/// of iterative refinement; throws if the system is ill-conditioned beyond
/// cond_limit.
CoefVector solve_linearized(const ForwardOp& op, const Sample& sample, const CoefVector& f_k,
                            const CoefVector& f_bar, double lambda,
                            const SolveOptions& opts = {});

/// Damped Gauss-Newton from f_bar: halves the step while the objective
/// increases (floor 1e-8), stops on relative coefficient change below tol.
/// If the first attempt stalls, retries from randomly perturbed starts and
/// keeps the best objective (ties broken by the smaller penalty norm).
SolveResult tikhonov_solve(const ForwardOp& op, const Sample& sample, const CoefVector& f_bar,
                           double lambda, const SolveOptions& opts = {});

enum class LambdaRule { theta_general, trivial, poly, log_m };

LambdaRule lambda_rule_from_string(const std::string& name);
std::string to_string(LambdaRule rule);

/// A-priori regularization parameter choices:
///   theta_general: solves lambda^{(p+q)/(2(p+1))} / sqrt(N(lambda)) = 1/sqrt(m)
///   trivial:       m^{-(p+1)/(2p+q+1)}
///   poly:          m^{-(p+1)/(p+q+b(p+1))}     (requires b in (0,1))
///   log_m:         ((log m)/m)^{(p+1)/(p+q)}
double lambda_apriori(LambdaRule rule, double p, double q, double b, long m,
                      const Eigen::VectorXd& mu);

/// Monotone bisection for the theta_general rule against an arbitrary
/// effective-dimension function (e.g. the trivial bound kappa^2/lambda).
double solve_theta_rule(double p, double q, long m,
                        const std::function<double(double)>& n_of_lambda, double lambda_max);

struct ConditionCheck {
    bool ok = false;
    double n_slack = 0.0;       // m*lambda - N(lambda)
    double lambda_slack = 0.0;  // min(1, mu_1) - lambda
};

/// N(lambda) <= m lambda and lambda <= min(1, ||T_nu||).
ConditionCheck check_condition_31(double lambda, long m, const Eigen::VectorXd& mu);

}  // namespace hsil
