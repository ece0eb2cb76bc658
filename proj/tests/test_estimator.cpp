#include "hsil/estimator.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>

using namespace hsil;

namespace {

struct Problem {
    TestbedSpec spec;
    KernelView kv;
    ForwardOp op;
    Sample sample;
    CoefVector truth;

    static TestbedSpec make_spec(int n) {
        TestbedSpec s;
        s.n = n;
        return s;
    }
    static ForwardConfig make_cfg(double c) {
        ForwardConfig cfg;
        cfg.kind = c == 0.0 ? ForwardConfig::Kind::diagonal_linear : ForwardConfig::Kind::hammerstein;
        cfg.c = c;
        return cfg;
    }

    Problem(int n, Eigen::Index m, double c, double noise_sigma, std::uint64_t seed)
        : spec(make_spec(n)), kv(KernelView::make(spec)), op(spec, kv, make_cfg(c)),
          sample{DesignPoints{}, {}}, truth(h_vector(Eigen::VectorXd::Zero(n))) {
        auto rng = make_rng(seed);
        for (int j = 1; j <= n; ++j)
            truth.coeffs[j - 1] = ((rng() & 1ULL) ? 1.0 : -1.0) * std::pow(j, -2.51);
        sample.dp = sample_uniform_design(spec, m, rng);
        sample.y = sampling_apply(sample.dp, kv, op.apply(truth));
        for (Eigen::Index i = 0; i < m; ++i) sample.y[i] += noise_sigma * normal01(rng);
    }
};

/// Naive objective: per-point evaluation of A(f) plus the explicit penalty sum.
double objective_oracle(const Problem& pb, const CoefVector& f, const CoefVector& f_bar,
                        double lambda) {
    const auto af = pb.op.apply(f);
    double misfit = 0.0;
    for (Eigen::Index i = 0; i < pb.sample.dp.m(); ++i) {
        double val = 0.0;
        for (int j = 1; j <= pb.spec.n; ++j)
            val += af.coeffs[j - 1] * std::sqrt(pb.kv.mu[j - 1]) *
                   basis_eval(pb.spec, j, pb.sample.dp.x[i]);
        misfit += (val - pb.sample.y[i]) * (val - pb.sample.y[i]);
    }
    misfit /= static_cast<double>(pb.sample.dp.m());
    double pen = 0.0;
    for (int j = 1; j <= pb.spec.n; ++j) {
        const double diff = f.coeffs[j - 1] - f_bar.coeffs[j - 1];
        pen += std::pow(static_cast<double>(j), 2.0 * pb.spec.a) * diff * diff;
    }
    return misfit + lambda * pen;
}

/// Column-by-column assembly of the sampled linearized system, solved with a
/// full-pivot factorization. Deliberately avoids the workspace shortcuts.
Eigen::VectorXd linearized_oracle(const Problem& pb, const CoefVector& f_k, const CoefVector& f_bar,
                                  double lambda) {
    const int n = pb.spec.n;
    const auto m = pb.sample.dp.m();
    Eigen::MatrixXd jac(m, n);
    for (int j = 0; j < n; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e[j] = 1.0;
        jac.col(j) = sampling_apply(pb.sample.dp, pb.kv, pb.op.frechet_apply(f_k, h_vector(e)));
    }
    const Eigen::VectorXd model0 = sampling_apply(pb.sample.dp, pb.kv, pb.op.apply(f_k));
    const Eigen::VectorXd b = pb.sample.y - model0 + jac * (f_k.coeffs - f_bar.coeffs);
    Eigen::MatrixXd normal = jac.transpose() * jac / static_cast<double>(m);
    for (int j = 1; j <= n; ++j)
        normal(j - 1, j - 1) += lambda * std::pow(static_cast<double>(j), 2.0 * pb.spec.a);
    const Eigen::VectorXd rhs = jac.transpose() * b / static_cast<double>(m);
    return f_bar.coeffs + Eigen::FullPivLU<Eigen::MatrixXd>(normal).solve(rhs);
}

}  // namespace

TEST_CASE("objective: vanishing and misfit-only cases") {
    Problem pb(12, 40, 0.1, 0.0, 3);
    const auto f_bar = pb.truth;
    CHECK(objective(pb.op, pb.sample, pb.truth, f_bar, 1.0) < 1e-24);

    Problem pb2(12, 40, 0.1, 0.05, 4);
    const auto zero = h_vector(Eigen::VectorXd::Zero(12));
    const double misfit_only = objective(pb2.op, pb2.sample, zero, zero, 1e9);
    const double small_lambda = objective(pb2.op, pb2.sample, zero, zero, 1e-9);
    CHECK(misfit_only == doctest::Approx(small_lambda).epsilon(1e-12));  // penalty is 0 at f = f_bar
}

TEST_CASE("objective: matches the naive two-term oracle") {
    Problem pb(10, 25, 0.1, 0.1, 5);
    auto rng = make_rng(6);
    for (int t = 0; t < 10; ++t) {
        const auto f = h_vector(test::random_coeffs(10, rng, 0.5));
        const auto f_bar = h_vector(test::random_coeffs(10, rng, 0.2));
        const double lambda = std::exp(-3.0 * uniform01(rng));
        const double got = objective(pb.op, pb.sample, f, f_bar, lambda);
        const double want = objective_oracle(pb, f, f_bar, lambda);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("solve_linearized: quadratic case equals the dense oracle") {
    Problem pb(8, 40, 0.0, 0.1, 7);
    auto rng = make_rng(8);
    const auto f_k = h_vector(test::random_coeffs(8, rng, 0.3));
    const auto f_bar = h_vector(test::random_coeffs(8, rng, 0.1));
    const double lambda = 0.05;
    const auto got = solve_linearized(pb.op, pb.sample, f_k, f_bar, lambda);
    const auto want = linearized_oracle(pb, f_k, f_bar, lambda);
    CHECK((got.coeffs - want).norm() < 1e-8 * (1.0 + want.norm()));
}

TEST_CASE("solve_linearized: hammerstein step matches the dense oracle") {
    Problem pb(8, 60, 0.1, 0.05, 9);
    auto rng = make_rng(10);
    const auto f_k = h_vector(test::random_coeffs(8, rng, 0.3));
    const auto f_bar = h_vector(Eigen::VectorXd::Zero(8));
    const double lambda = 0.02;
    const auto got = solve_linearized(pb.op, pb.sample, f_k, f_bar, lambda);
    const auto want = linearized_oracle(pb, f_k, f_bar, lambda);
    CHECK((got.coeffs - want).norm() < 1e-8 * (1.0 + want.norm()));
}

TEST_CASE("solve_linearized: huge lambda collapses to the initial guess") {
    Problem pb(8, 40, 0.1, 0.1, 11);
    auto rng = make_rng(12);
    const auto f_bar = h_vector(test::random_coeffs(8, rng, 0.2));
    const auto got = solve_linearized(pb.op, pb.sample, f_bar, f_bar, 1e8);
    CHECK((got.coeffs - f_bar.coeffs).norm() < 1e-4);
}

TEST_CASE("tikhonov_solve: one-step convergence on the quadratic problem") {
    Problem pb(16, 120, 0.0, 0.1, 13);
    const auto f_bar = h_vector(Eigen::VectorXd::Zero(16));
    const double lambda = 0.01;
    const auto res = tikhonov_solve(pb.op, pb.sample, f_bar, lambda);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    const auto closed = linearized_oracle(pb, f_bar, f_bar, lambda);
    CHECK((res.f_hat.coeffs - closed).norm() < 1e-8 * (1.0 + closed.norm()));
}

TEST_CASE("tikhonov_solve: noiseless identifiability at tiny lambda") {
    Problem pb(32, 400, 0.0, 0.0, 17);
    const auto f_bar = h_vector(Eigen::VectorXd::Zero(32));
    const auto res = tikhonov_solve(pb.op, pb.sample, f_bar, 1e-10);
    CHECK(res.converged);
    CHECK((res.f_hat.coeffs - pb.truth.coeffs).norm() < 1e-4);
}

TEST_CASE("tikhonov_solve: hammerstein convergence and monotone trace") {
    int converged = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Problem pb(24, 200, 0.1, 0.1, 100 + seed);
        const auto f_bar = h_vector(Eigen::VectorXd::Zero(24));
        const auto res = tikhonov_solve(pb.op, pb.sample, f_bar, 0.02);
        if (res.converged && res.iterations <= 20) ++converged;
        for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
            CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-12);
    }
    CHECK(converged == 10);
}

TEST_CASE("lambda_apriori: closed-form rules") {
    Eigen::VectorXd mu = KernelView::make(Problem::make_spec(200)).mu;

    const double trivial = lambda_apriori(LambdaRule::trivial, 1.0, 2.0, 0.5, 10000, mu);
    CHECK(trivial == doctest::Approx(std::pow(10.0, -1.6)).epsilon(1e-12));

    const double poly = lambda_apriori(LambdaRule::poly, 1.0, 2.0, 0.5, 10000, mu);
    CHECK(poly == doctest::Approx(0.01).epsilon(1e-14));

    const double logr = lambda_apriori(LambdaRule::log_m, 1.0, 2.0, 0.5, 10000, mu);
    CHECK(logr == doctest::Approx(std::pow(std::log(10000.0) / 10000.0, 2.0 / 3.0)).epsilon(1e-14));

    CHECK_THROWS_AS(lambda_apriori(LambdaRule::trivial, 1.0, 0.5, 0.5, 100, mu),
                    std::invalid_argument);
    CHECK_THROWS_AS(lambda_apriori(LambdaRule::trivial, 1.0, 4.0, 0.5, 100, mu),
                    std::invalid_argument);
    CHECK_THROWS_AS(lambda_apriori(LambdaRule::poly, 1.0, 2.0, 1.5, 100, mu), std::invalid_argument);
}

TEST_CASE("lambda_apriori: theta_general solves its defining equation") {
    Eigen::VectorXd mu = KernelView::make(Problem::make_spec(200)).mu;
    for (long m : {100L, 1000L, 10000L, 100000L}) {
        const double lambda = lambda_apriori(LambdaRule::theta_general, 1.0, 2.0, 0.5, m, mu);
        const double theta = std::pow(lambda, 3.0 / 4.0) / std::sqrt(effective_dimension(mu, lambda));
        CHECK(theta == doctest::Approx(1.0 / std::sqrt(static_cast<double>(m))).epsilon(1e-9));
        CHECK(check_condition_31(lambda, m, mu).ok);
    }
}

TEST_CASE("lambda_apriori: non-increasing in m for every rule") {
    Eigen::VectorXd mu = KernelView::make(Problem::make_spec(200)).mu;
    for (auto rule : {LambdaRule::theta_general, LambdaRule::trivial, LambdaRule::poly,
                      LambdaRule::log_m}) {
        double prev = std::numeric_limits<double>::infinity();
        for (long m : {100L, 400L, 1600L, 6400L, 25600L}) {
            const double lambda = lambda_apriori(rule, 1.0, 2.0, 0.5, m, mu);
            CHECK(lambda <= prev + 1e-15);
            prev = lambda;
        }
    }
}

TEST_CASE("theta rule with the trivial effective-dimension bound") {
    Eigen::VectorXd mu = KernelView::make(Problem::make_spec(200)).mu;
    const double kappa_sq_bound = mu[0] + 2.0 * (mu.sum() - mu[0]);
    // Theta with N(lambda) = kappa^2/lambda collapses to the trivial rule up
    // to the factor kappa^{2(p+1)/(2p+q+1)}; check the exponent numerically.
    std::vector<double> log_m, log_lambda;
    for (double expo = 2.0; expo <= 6.0; expo += 1.0) {
        const long m = static_cast<long>(std::llround(std::pow(10.0, expo)));
        const double lambda = solve_theta_rule(
            1.0, 2.0, m, [&](double l) { return kappa_sq_bound / l; }, mu[0]);
        log_m.push_back(std::log10(static_cast<double>(m)));
        log_lambda.push_back(std::log10(lambda));
    }
    for (std::size_t i = 1; i < log_m.size(); ++i) {
        const double slope = (log_lambda[i] - log_lambda[i - 1]) / (log_m[i] - log_m[i - 1]);
        CHECK(slope == doctest::Approx(-0.4).epsilon(1e-6));
    }
}

TEST_CASE("theta is strictly increasing in lambda (bisection well-posedness)") {
    Eigen::VectorXd mu = KernelView::make(Problem::make_spec(200)).mu;
    const double expo = 3.0 / 4.0;  // (p+q)/(2(p+1)) at p=1, q=2
    double prev = 0.0;
    for (double lambda : log_lambda_grid(1e-9, 1.0, 40)) {
        const double theta = std::pow(lambda, expo) / std::sqrt(effective_dimension(mu, lambda));
        CHECK(theta > prev);
        prev = theta;
    }
}

TEST_CASE("check_condition_31: pass and fail cases") {
    Eigen::VectorXd mu = KernelView::make(Problem::make_spec(200)).mu;
    const auto good = check_condition_31(mu[0], 1000000, mu);
    CHECK(good.ok);
    CHECK(good.lambda_slack == doctest::Approx(0.0));

    const auto bad = check_condition_31(1e-12, 10, mu);
    CHECK_FALSE(bad.ok);
    CHECK(bad.n_slack < 0.0);

    CHECK_FALSE(check_condition_31(2.0, 1000000, mu).ok);  // lambda above min(1, mu_1)
}
