#include "hsil/rkhs.hpp"

#include "hsil/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hsil {

KernelView KernelView::make(const TestbedSpec& spec) {
    spec.validate();
    return {spec, spec.mu_law.realize(spec.n)};
}

double kernel_eval(const KernelView& kv, double x, double xp) {
    if (x < 0.0 || x > 1.0 || xp < 0.0 || xp > 1.0)
        throw std::domain_error("kernel_eval: point outside [0,1]");
    Eigen::RowVectorXd rx(kv.spec.n), rxp(kv.spec.n);
    basis_row(kv.spec, x, rx);
    basis_row(kv.spec, xp, rxp);
    double acc = 0.0;
    for (int j = 0; j < kv.spec.n; ++j) acc += kv.mu[j] * rx(j) * rxp(j);
    return acc;
}

KappaSq kappa_sq(const KernelView& kv, int grid_points) {
    if (grid_points < 2) throw std::invalid_argument("kappa_sq: grid too small");
    KappaSq out;
    for (int i = 0; i < grid_points; ++i) {
        const double x = static_cast<double>(i) / (grid_points - 1);
        out.grid_sup = std::max(out.grid_sup, kernel_eval(kv, x, x));
    }
    out.series_bound = kv.mu[0];
    for (int j = 1; j < kv.spec.n; ++j) out.series_bound += 2.0 * kv.mu[j];
    return out;
}

DesignPoints DesignPoints::make(const TestbedSpec& spec, Eigen::VectorXd x) {
    if (x.size() < 1) throw std::invalid_argument("DesignPoints: need at least one point");
    DesignPoints dp;
    dp.features.resize(x.size(), spec.n);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < 0.0 || x[i] > 1.0)
            throw std::domain_error("DesignPoints: point outside [0,1]");
        basis_row(spec, x[i], dp.features.row(i));
    }
    dp.x = std::move(x);
    return dp;
}

DesignPoints sample_uniform_design(const TestbedSpec& spec, Eigen::Index m, std::mt19937_64& rng) {
    Eigen::VectorXd x(m);
    for (Eigen::Index i = 0; i < m; ++i) x[i] = uniform01(rng);
    return DesignPoints::make(spec, std::move(x));
}

Eigen::VectorXd sampling_apply(const DesignPoints& dp, const KernelView& kv, const CoefVector& g) {
    if (g.space != Space::Hprime)
        throw std::invalid_argument("sampling_apply: expects an Hprime-tagged vector");
    if (g.coeffs.size() != kv.spec.n)
        throw std::invalid_argument("sampling_apply: length mismatch");
    return dp.features * (kv.mu.array().sqrt() * g.coeffs.array()).matrix();
}

CoefVector sampling_adjoint(const DesignPoints& dp, const KernelView& kv, const Eigen::VectorXd& c) {
    if (c.size() != dp.m()) throw std::invalid_argument("sampling_adjoint: length mismatch");
    Eigen::VectorXd v = dp.features.transpose() * c / static_cast<double>(dp.m());
    return hprime_vector((kv.mu.array().sqrt() * v.array()).matrix());
}

Eigen::VectorXd covariance_population(const KernelView& kv) { return kv.mu; }

Eigen::MatrixXd covariance_empirical(const DesignPoints& dp, const KernelView& kv) {
    const auto m = static_cast<double>(dp.m());
    Eigen::VectorXd root = kv.mu.array().sqrt();
    Eigen::MatrixXd scaled = dp.features * root.asDiagonal();  // m x n
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(kv.spec.n, kv.spec.n);
    t.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose(), 1.0 / m);
    return t.selfadjointView<Eigen::Lower>();
}

double effective_dimension(const Eigen::VectorXd& mu, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("effective_dimension: lambda must be positive");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        if (mu[j] < 0.0) throw std::invalid_argument("effective_dimension: negative eigenvalue");
        acc += mu[j] / (lambda + mu[j]);
    }
    return acc;
}

double effective_dimension_dense(const Eigen::MatrixXd& t_op, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("effective_dimension_dense: lambda must be positive");
    Eigen::MatrixXd shifted = t_op;
    shifted.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("effective_dimension_dense: factorization failed");
    return ldlt.solve(t_op).trace();
}

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
    const auto n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    LineFit fit;
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) return fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double pred = fit.intercept + fit.slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    fit.r2 = ss_tot > 1e-300 ? 1.0 - ss_res / ss_tot : 0.0;
    return fit;
}

}  // namespace

DecayFit classify_decay(const Eigen::VectorXd& mu, const std::vector<double>& lambda_grid) {
    if (lambda_grid.size() < 5)
        throw std::invalid_argument("classify_decay: need at least 5 lambda values");
    double lo = lambda_grid.front(), hi = lambda_grid.front();
    for (double l : lambda_grid) {
        if (!(l > 0.0)) throw std::invalid_argument("classify_decay: lambda must be positive");
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    if (hi / lo < 100.0)
        throw std::invalid_argument("classify_decay: grid must span at least two decades");

    // The decay assumptions describe the untruncated operator; grid points
    // where N(lambda) saturates against the truncation n carry no decay
    // signal and would bend the fit, so they are dropped when enough points
    // survive.
    const double n_cap = 0.5 * static_cast<double>(mu.size());
    std::vector<double> kept;
    for (double l : lambda_grid)
        if (effective_dimension(mu, l) <= n_cap) kept.push_back(l);
    if (kept.size() < 5) kept = lambda_grid;

    std::vector<double> n_vals, log_n, log_lam, log_log_inv;
    for (double l : kept) {
        const double n_eff = effective_dimension(mu, l);
        n_vals.push_back(n_eff);
        log_n.push_back(std::log(n_eff));
        log_lam.push_back(std::log(l));
        // log(1/lambda) can be <= 0 on a grid reaching above 1; clamp away.
        log_log_inv.push_back(std::log(std::max(std::log(1.0 / l), 1e-12)));
    }

    DecayFit fit;
    const double n_max = *std::max_element(n_vals.begin(), n_vals.end());
    const double n_min = *std::min_element(n_vals.begin(), n_vals.end());
    if (n_max < 2.0 * n_min) return fit;  // flat N(lambda): no decay signal

    const LineFit poly = least_squares(log_lam, log_n);
    const LineFit logf = least_squares(log_log_inv, log_n);
    fit.r2_poly = poly.r2;
    fit.r2_log = logf.r2;
    constexpr double kAcceptR2 = 0.98;
    if (poly.r2 >= kAcceptR2 && (poly.r2 >= logf.r2 || logf.r2 < kAcceptR2) && poly.slope < 0.0) {
        fit.regime = DecayRegime::polynomial;
        fit.b_hat = -poly.slope;
        fit.c_hat = std::exp(poly.intercept);
    } else if (logf.r2 >= kAcceptR2) {
        fit.regime = DecayRegime::logarithmic;
        fit.b_hat = logf.slope;
        fit.c_hat = std::exp(logf.intercept);
    }
    return fit;
}

std::vector<double> log_lambda_grid(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2)
        throw std::invalid_argument("log_lambda_grid: invalid range");
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double step = (std::log(hi) - std::log(lo)) / (count - 1);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
    return grid;
}

}  // namespace hsil
