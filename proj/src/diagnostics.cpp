#include "hsil/diagnostics.hpp"

#include "hsil/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace hsil {

namespace {

/// Largest eigenvalue of a symmetric PSD matrix.
double sym_top_eigenvalue(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("diagnostics: eigen-decomposition failed");
    return eig.eigenvalues().maxCoeff();
}

}  // namespace

StandardizedQuantities compute_standardized(const ForwardOp& op, const Sample& sample,
                                            const CoefVector& f_rho, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("compute_standardized: lambda must be positive");
    const auto& mu = op.mu();
    const int n = op.spec().n;
    const auto m = static_cast<double>(sample.dp.m());

    StandardizedQuantities out;
    out.lambda = lambda;

    // Delta_z = S_x A(f_rho) - y, exactly.
    KernelView kv{op.spec(), mu};
    Eigen::VectorXd delta = sampling_apply(sample.dp, kv, op.apply(f_rho)) - sample.y;

    // Theta_z via the diagonal (T_nu + lambda)^{-1/2} in Hprime coordinates.
    Eigen::VectorXd adj = sampling_adjoint(sample.dp, kv, delta).coeffs;
    out.theta_z = (adj.array() / (mu.array() + lambda).sqrt()).matrix().norm();

    // Psi_x: W = (T_nu + lambda)^{-1/2} (T_nu - T_x); operator norm via the
    // gram matrix, HS norm is the Frobenius norm.
    Eigen::MatrixXd t_x = covariance_empirical(sample.dp, kv);
    Eigen::MatrixXd diff = Eigen::MatrixXd(mu.asDiagonal()) - t_x;
    Eigen::VectorXd inv_root = (mu.array() + lambda).rsqrt();
    Eigen::MatrixXd w = inv_root.asDiagonal() * diff;
    out.psi_x_hs = w.norm();
    out.psi_x = std::sqrt(std::max(sym_top_eigenvalue(w * w.transpose()), 0.0));

    // Gamma_x^2 = lambda_max((T_nu+lambda)^{1/2} (T_x+lambda)^{-1} (T_nu+lambda)^{1/2}).
    Eigen::MatrixXd shifted = t_x;
    shifted.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("compute_standardized: T_x + lambda not factorizable");
    Eigen::VectorXd root = (mu.array() + lambda).sqrt();
    Eigen::MatrixXd inner = root.asDiagonal() * ldlt.solve(Eigen::MatrixXd(root.asDiagonal()));
    // Symmetrize away solve round-off before the eigen call.
    Eigen::MatrixXd sym = 0.5 * (inner + inner.transpose());
    out.gamma_x = std::sqrt(std::max(sym_top_eigenvalue(sym), 0.0));

    (void)n;
    return out;
}

PropositionA1Bounds proposition_a1_bounds(long m, double lambda, double eta, double m_scale,
                                          double sigma_bound, double kappa, double n_lambda) {
    if (m < 1 || !(lambda > 0.0) || !(eta > 0.0 && eta < 1.0) || !(m_scale > 0.0) ||
        !(sigma_bound > 0.0) || !(kappa > 0.0) || !(n_lambda > 0.0))
        throw std::invalid_argument("proposition_a1_bounds: all arguments must be positive, eta in (0,1)");
    const double md = static_cast<double>(m);
    const double log_factor = std::log(2.0 / eta);
    PropositionA1Bounds b;
    b.theta_bound =
        2.0 * (kappa * m_scale / (md * std::sqrt(lambda)) + std::sqrt(sigma_bound * sigma_bound * n_lambda / md)) *
        log_factor;
    b.psi_hs_bound =
        2.0 * (kappa * kappa / (md * std::sqrt(lambda)) + std::sqrt(kappa * kappa * n_lambda / md)) *
        log_factor;
    return b;
}

PropositionA2Bounds proposition_a2_bounds(double lambda, double eta, double kappa, double s) {
    if (!(lambda > 0.0) || !(eta > 0.0 && eta < 1.0) || !(kappa > 0.0) || s < 0.0 || s > 1.0)
        throw std::invalid_argument("proposition_a2_bounds: invalid arguments");
    const double log_factor = std::log(2.0 / eta);
    PropositionA2Bounds b;
    b.psi_hs_bound = std::sqrt(lambda) * 2.0 * kappa * (2.0 * kappa + 1.0) * log_factor;
    b.gamma_power_bound = std::pow((2.0 * kappa + 1.0) * (2.0 * kappa + 1.0) * log_factor, 2.0 * s);
    return b;
}

double empirical_quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
    if (!(prob > 0.0 && prob <= 1.0)) throw std::invalid_argument("empirical_quantile: prob in (0,1]");
    std::sort(values.begin(), values.end());
    const auto count = static_cast<double>(values.size());
    auto idx = static_cast<std::size_t>(std::ceil(prob * count)) - 1;
    idx = std::min(idx, values.size() - 1);
    return values[idx];
}

ConcentrationReport concentration_study(const ForwardOp& op, const KernelView& kv,
                                        const NoiseModel& noise, const CoefVector& f_rho, long m,
                                        double lambda, int trials, double eta,
                                        std::uint64_t root_seed, int threads) {
    if (trials < 100) throw std::invalid_argument("concentration_study: trials must be >= 100");
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("concentration_study: eta in (0,1)");

    ConcentrationReport report;
    report.m = m;
    report.lambda = lambda;
    report.eta = eta;
    report.rows.resize(static_cast<std::size_t>(trials));

    Eigen::VectorXd g_rho = op.apply(f_rho).coeffs;

    auto run_trial = [&](int t) {
        auto rng = make_rng(derive_seed(root_seed, {0xd1a6ULL, static_cast<std::uint64_t>(t)}));
        DesignPoints dp = sample_uniform_design(op.spec(), m, rng);
        Eigen::VectorXd y = sampling_apply(dp, kv, hprime_vector(g_rho));
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sample_noise(noise, rng);
        Sample sample{std::move(dp), std::move(y)};
        StandardizedQuantities q = compute_standardized(op, sample, f_rho, lambda);
        report.rows[static_cast<std::size_t>(t)] = {q.theta_z, q.psi_x, q.psi_x_hs, q.gamma_x};
    };

    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, trials));
    if (workers == 1) {
        for (int t = 0; t < trials; ++t) run_trial(t);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int t = w; t < trials; t += workers) run_trial(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    const KappaSq ks = kappa_sq(kv);
    report.kappa = std::sqrt(ks.grid_sup);
    report.n_lambda = effective_dimension(kv.mu, lambda);
    report.condition_31_ok = check_condition_31(lambda, m, kv.mu).ok;

    std::vector<double> theta, psi_hs, gamma;
    theta.reserve(report.rows.size());
    psi_hs.reserve(report.rows.size());
    gamma.reserve(report.rows.size());
    for (const auto& r : report.rows) {
        theta.push_back(r.theta_z);
        psi_hs.push_back(r.psi_x_hs);
        gamma.push_back(r.gamma_x);
    }
    const double prob = 1.0 - eta;
    const PropositionA1Bounds a1 = proposition_a1_bounds(m, lambda, eta, noise.bernstein_m,
                                                         noise.bernstein_sigma, report.kappa,
                                                         report.n_lambda);
    const PropositionA2Bounds a2 = proposition_a2_bounds(lambda, eta, report.kappa, 0.5);

    auto make_check = [&](std::vector<double>& vals, double bound) {
        QuantileCheck check;
        check.quantile = empirical_quantile(vals, prob);
        check.bound = bound;
        check.slack = bound - check.quantile;
        check.ok = check.quantile <= bound;
        return check;
    };
    report.theta_a1 = make_check(theta, a1.theta_bound);
    report.psi_hs_a1 = make_check(psi_hs, a1.psi_hs_bound);
    report.psi_hs_a2 = make_check(psi_hs, a2.psi_hs_bound);
    report.gamma_a2 = make_check(gamma, a2.gamma_power_bound);
    return report;
}

}  // namespace hsil
