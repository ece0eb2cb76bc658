#include "hsil/estimator.hpp"

#include "hsil/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hsil {

namespace {

Eigen::VectorXd penalty_weights(const TestbedSpec& spec, double penalty_a) {
    const double a_pen = penalty_a < 0.0 ? spec.a : penalty_a;
    Eigen::VectorXd w(spec.n);
    for (int j = 1; j <= spec.n; ++j) w[j - 1] = std::pow(static_cast<double>(j), 2.0 * a_pen);
    return w;
}

/// Shared per-sample state for the Gauss-Newton iteration: with
/// P = Phi diag(j^{-ap}), every step only needs G0 = P^T P / m and
/// v0 = P^T y / m plus O(n^3) work.
struct GnWorkspace {
    Eigen::MatrixXd p_mat;    // m x n
    Eigen::MatrixXd g0;      // n x n
    Eigen::VectorXd v0;      // n
    Eigen::VectorXd penalty;  // n, diag of L_pen^2
    double y_sq_mean = 0.0;
};

GnWorkspace make_workspace(const ForwardOp& op, const Sample& sample, double penalty_a) {
    if (sample.y.size() != sample.dp.m())
        throw std::invalid_argument("estimator: sample length mismatch");
    GnWorkspace ws;
    const auto m = static_cast<double>(sample.dp.m());
    ws.p_mat = sample.dp.features * op.sampled_weight().asDiagonal();
    ws.g0 = Eigen::MatrixXd::Zero(op.spec().n, op.spec().n);
    ws.g0.selfadjointView<Eigen::Lower>().rankUpdate(ws.p_mat.transpose(), 1.0 / m);
    ws.g0 = ws.g0.selfadjointView<Eigen::Lower>();
    ws.v0 = ws.p_mat.transpose() * sample.y / m;
    ws.penalty = penalty_weights(op.spec(), penalty_a);
    ws.y_sq_mean = sample.y.squaredNorm() / m;
    return ws;
}

/// A(f) in the argument of the sampled map: S_x A(f) = P (f + c P_n(f^2)).
Eigen::VectorXd lifted_coeffs(const ForwardOp& op, const Eigen::VectorXd& f) {
    if (op.nonlinearity() == 0.0) return f;
    return f + op.nonlinearity() * op.square_coeffs(f);
}

double objective_ws(const ForwardOp& op, const GnWorkspace& ws, const Sample& sample,
                    const Eigen::VectorXd& f, const Eigen::VectorXd& f_bar, double lambda) {
    const auto m = static_cast<double>(sample.dp.m());
    const double misfit = (ws.p_mat * lifted_coeffs(op, f) - sample.y).squaredNorm() / m;
    const Eigen::VectorXd diff = f - f_bar;
    const double pen = (ws.penalty.array() * diff.array().square()).sum();
    return misfit + lambda * pen;
}

Eigen::VectorXd gn_step(const ForwardOp& op, const GnWorkspace& ws, const Eigen::VectorXd& f_k,
                        const Eigen::VectorXd& f_bar, double lambda, const SolveOptions& opts) {
    const int n = op.spec().n;
    const double c = op.nonlinearity();

    Eigen::MatrixXd normal;
    Eigen::VectorXd rhs;
    if (c == 0.0) {
        normal = ws.g0;
        rhs = ws.v0 - ws.g0 * f_bar;
    } else {
        Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n) + 2.0 * c * op.multiplication_matrix(f_k);
        normal = b.transpose() * ws.g0 * b;
        rhs = b.transpose() * (ws.v0 - ws.g0 * lifted_coeffs(op, f_k)) + normal * (f_k - f_bar);
    }
    normal.diagonal() += lambda * ws.penalty;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    const Eigen::VectorXd diag = ldlt.vectorD();
    const double dmax = diag.maxCoeff();
    const double dmin = diag.minCoeff();
    if (ldlt.info() != Eigen::Success || !(dmin > 0.0) || dmax / dmin > opts.cond_limit) {
        std::ostringstream msg;
        msg << "solve_linearized: ill-conditioned normal equations (lambda=" << lambda
            << ", n=" << n << ", pivot ratio=" << (dmin > 0.0 ? dmax / dmin : -1.0) << ")";
        throw std::runtime_error(msg.str());
    }

    Eigen::VectorXd u = ldlt.solve(rhs);
    const double rhs_norm = rhs.norm();
    if (rhs_norm > 0.0) {
        Eigen::VectorXd residual = rhs - normal.selfadjointView<Eigen::Lower>() * u;
        if (residual.norm() > 1e-10 * rhs_norm) u += ldlt.solve(residual);
    }
    return f_bar + u;
}

struct Attempt {
    Eigen::VectorXd f;
    double objective = 0.0;
    int iterations = 0;
    std::vector<double> trace;
    bool converged = false;
};

Attempt run_attempt(const ForwardOp& op, const GnWorkspace& ws, const Sample& sample,
                    const Eigen::VectorXd& start, const Eigen::VectorXd& f_bar, double lambda,
                    const SolveOptions& opts) {
    Attempt at;
    at.f = start;
    at.objective = objective_ws(op, ws, sample, at.f, f_bar, lambda);
    at.trace.push_back(at.objective);

    for (int it = 0; it < opts.max_iter; ++it) {
        const Eigen::VectorXd target = gn_step(op, ws, at.f, f_bar, lambda, opts);
        const Eigen::VectorXd step = target - at.f;
        const double scale = std::max(at.f.norm(), 1.0);
        if (step.norm() < opts.tol * scale) {
            at.converged = true;  // already stationary, no move needed
            break;
        }
        double t = 1.0;
        double next_obj = objective_ws(op, ws, sample, at.f + t * step, f_bar, lambda);
        while (next_obj > at.objective && t > opts.step_floor) {
            t *= 0.5;
            next_obj = objective_ws(op, ws, sample, at.f + t * step, f_bar, lambda);
        }
        if (next_obj > at.objective) break;  // stalled at the step floor
        at.f += t * step;
        at.objective = next_obj;
        at.trace.push_back(at.objective);
        ++at.iterations;
        if (t * step.norm() < opts.tol * std::max(at.f.norm(), 1.0)) {
            at.converged = true;
            break;
        }
    }
    return at;
}

}  // namespace

double objective(const ForwardOp& op, const Sample& sample, const CoefVector& f,
                 const CoefVector& f_bar, double lambda, double penalty_a) {
    if (!(lambda > 0.0)) throw std::invalid_argument("objective: lambda must be positive");
    if (f.space != Space::H || f_bar.space != Space::H)
        throw std::invalid_argument("objective: expects H elements");
    const GnWorkspace ws = make_workspace(op, sample, penalty_a);
    return objective_ws(op, ws, sample, f.coeffs, f_bar.coeffs, lambda);
}

CoefVector solve_linearized(const ForwardOp& op, const Sample& sample, const CoefVector& f_k,
                            const CoefVector& f_bar, double lambda, const SolveOptions& opts) {
    if (!(lambda > 0.0)) throw std::invalid_argument("solve_linearized: lambda must be positive");
    const GnWorkspace ws = make_workspace(op, sample, opts.penalty_a);
    return h_vector(gn_step(op, ws, f_k.coeffs, f_bar.coeffs, lambda, opts));
}

SolveResult tikhonov_solve(const ForwardOp& op, const Sample& sample, const CoefVector& f_bar,
                           double lambda, const SolveOptions& opts) {
    if (!(lambda > 0.0)) throw std::invalid_argument("tikhonov_solve: lambda must be positive");
    if (f_bar.space != Space::H) throw std::invalid_argument("tikhonov_solve: f_bar must be in H");
    const GnWorkspace ws = make_workspace(op, sample, opts.penalty_a);

    Attempt best = run_attempt(op, ws, sample, f_bar.coeffs, f_bar.coeffs, lambda, opts);
    int restarts = 0;
    if (!best.converged) {
        auto rng = make_rng(opts.restart_seed);
        for (int r = 0; r < opts.max_restarts; ++r) {
            Eigen::VectorXd dir(op.spec().n);
            for (int i = 0; i < op.spec().n; ++i) dir[i] = normal01(rng);
            if (dir.norm() == 0.0) continue;
            dir *= opts.restart_radius / dir.norm();
            Attempt at = run_attempt(op, ws, sample, f_bar.coeffs + dir, f_bar.coeffs, lambda, opts);
            ++restarts;
            const bool better =
                at.objective < best.objective ||
                (at.objective == best.objective &&
                 (ws.penalty.array() * (at.f - f_bar.coeffs).array().square()).sum() <
                     (ws.penalty.array() * (best.f - f_bar.coeffs).array().square()).sum());
            if (better) best = std::move(at);
            if (best.converged) break;
        }
    }

    SolveResult result;
    result.f_hat = h_vector(std::move(best.f));
    result.iterations = best.iterations;
    result.objective_trace = std::move(best.trace);
    result.converged = best.converged;
    result.lambda = lambda;
    result.objective = best.objective;
    result.restarts = restarts;
    return result;
}

LambdaRule lambda_rule_from_string(const std::string& name) {
    if (name == "theta_general") return LambdaRule::theta_general;
    if (name == "trivial") return LambdaRule::trivial;
    if (name == "poly") return LambdaRule::poly;
    if (name == "log") return LambdaRule::log_m;
    throw std::invalid_argument("unknown lambda rule '" + name + "'");
}

std::string to_string(LambdaRule rule) {
    switch (rule) {
        case LambdaRule::theta_general: return "theta_general";
        case LambdaRule::trivial: return "trivial";
        case LambdaRule::poly: return "poly";
        case LambdaRule::log_m: return "log";
    }
    return "?";
}

double solve_theta_rule(double p, double q, long m,
                        const std::function<double(double)>& n_of_lambda, double lambda_max) {
    const double target = 1.0 / std::sqrt(static_cast<double>(m));
    const double expo = (p + q) / (2.0 * (p + 1.0));
    auto theta = [&](double lambda) { return std::pow(lambda, expo) / std::sqrt(n_of_lambda(lambda)); };

    double lo = 1e-14, hi = lambda_max;
    if (theta(hi) < target)
        throw std::runtime_error("solve_theta_rule: bracket failure (m too small)");
    if (theta(lo) > target)
        throw std::runtime_error("solve_theta_rule: bracket failure at the lower end");
    // Theta is increasing (N decreases in lambda); bisect in log space.
    while (hi / lo > 1.0 + 1e-10) {
        const double mid = std::sqrt(lo * hi);
        (theta(mid) < target ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

double lambda_apriori(LambdaRule rule, double p, double q, double b, long m,
                      const Eigen::VectorXd& mu) {
    if (m < 2) throw std::invalid_argument("lambda_apriori: m must be >= 2");
    if (!(q >= 1.0 && q <= 2.0 + p))
        throw std::invalid_argument("lambda_apriori: q must lie in [1, 2+p]");
    const auto md = static_cast<double>(m);
    switch (rule) {
        case LambdaRule::trivial:
            return std::pow(md, -(p + 1.0) / (2.0 * p + q + 1.0));
        case LambdaRule::poly:
            if (!(b > 0.0 && b < 1.0))
                throw std::invalid_argument("lambda_apriori: poly rule needs b in (0,1)");
            return std::pow(md, -(p + 1.0) / (p + q + b * (p + 1.0)));
        case LambdaRule::log_m:
            return std::pow(std::log(md) / md, (p + 1.0) / (p + q));
        case LambdaRule::theta_general:
            return solve_theta_rule(p, q, m,
                                    [&mu](double lambda) { return effective_dimension(mu, lambda); },
                                    mu.maxCoeff());
    }
    throw std::logic_error("lambda_apriori: unreachable");
}

ConditionCheck check_condition_31(double lambda, long m, const Eigen::VectorXd& mu) {
    if (!(lambda > 0.0)) throw std::invalid_argument("check_condition_31: lambda must be positive");
    ConditionCheck check;
    const double n_lambda = effective_dimension(mu, lambda);
    check.n_slack = static_cast<double>(m) * lambda - n_lambda;
    check.lambda_slack = std::min(1.0, mu.maxCoeff()) - lambda;
    check.ok = check.n_slack >= 0.0 && check.lambda_slack >= 0.0;
    return check;
}

}  // namespace hsil
