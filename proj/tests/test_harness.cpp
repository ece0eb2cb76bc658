#include "hsil/harness.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace hsil;

namespace {

ExperimentConfig mini_config() {
    ExperimentConfig cfg;
    cfg.testbed.n = 32;
    cfg.op.c = 0.1;
    cfg.q = 2.0;
    cfg.b = 0.5;
    cfg.rule = LambdaRule::poly;
    cfg.m_grid = {100, 200, 400, 800};
    cfg.trials_per_m = 8;
    cfg.root_seed = 424242;
    cfg.threads = 2;
    return cfg;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    REQUIRE(file);
    return {std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("make_truth: magnitude law and seed determinism") {
    TestbedSpec spec;
    spec.n = 200;
    const auto f = make_truth(spec, 2.0, 9);
    CHECK(std::abs(f.coeffs[1]) / std::abs(f.coeffs[0]) ==
          doctest::Approx(std::pow(2.0, -2.51)).epsilon(1e-12));

    const auto again = make_truth(spec, 2.0, 9);
    CHECK((f.coeffs - again.coeffs).norm() == 0.0);

    const auto other = make_truth(spec, 2.0, 10);
    CHECK((f.coeffs - other.coeffs).norm() > 0.0);  // sign pattern moves with the seed

    CHECK_THROWS_AS(make_truth(spec, 0.5, 9), std::invalid_argument);
}

TEST_CASE("make_truth: H_q norm is stable under truncation growth") {
    TestbedSpec spec;
    spec.n = 200;
    TestbedSpec wide = spec;
    wide.n = 400;
    const double qs[] = {1.0, 2.0, 3.0};
    for (double q : qs) {
        const auto f200 = make_truth(spec, q, 5);
        const auto f400 = make_truth(wide, q, 5);
        const double n200 = hs_norm(spec, f200, q);
        const double n400 = hs_norm(wide, f400, q);
        CHECK(std::abs(n400 - n200) / n200 < 1e-2);
    }
}

TEST_CASE("run_trial: bit-identical reruns and sane output") {
    const auto cfg = mini_config();
    const auto a = run_trial(cfg, 200, 12345);
    const auto b = run_trial(cfg, 200, 12345);
    CHECK(a.error_h == b.error_h);
    CHECK(a.lambda == b.lambda);
    CHECK(a.converged == b.converged);
    CHECK(a.converged);
    CHECK(a.error_h > 0.0);
    CHECK(a.error_h < 1.0);

    const auto c = run_trial(cfg, 200, 54321);
    CHECK(c.error_h != a.error_h);
}

TEST_CASE("run_trial: noiseless linear limit recovers the truth") {
    auto cfg = mini_config();
    cfg.op.kind = ForwardConfig::Kind::diagonal_linear;
    cfg.op.c = 0.0;
    cfg.noise.sigma = 0.0;
    // Identifiability: full-rank design with m >> n and lambda ~ 0.
    const auto kv = KernelView::make(cfg.testbed);
    ForwardOp op(cfg.testbed, kv, cfg.op);
    const auto truth = make_truth(cfg.testbed, cfg.q, cfg.root_seed);
    auto rng = make_rng(100);
    auto dp = sample_uniform_design(cfg.testbed, 400, rng);
    Eigen::VectorXd y = sampling_apply(dp, kv, op.apply(truth));
    Sample sample{std::move(dp), std::move(y)};
    const auto res =
        tikhonov_solve(op, sample, h_vector(Eigen::VectorXd::Zero(cfg.testbed.n)), 1e-10);
    CHECK((res.f_hat.coeffs - truth.coeffs).norm() < 1e-4);
}

TEST_CASE("solver error is invariant to permuting the observations") {
    auto cfg = mini_config();
    const auto kv = KernelView::make(cfg.testbed);
    ForwardOp op(cfg.testbed, kv, cfg.op);
    const auto truth = make_truth(cfg.testbed, cfg.q, 1);
    auto rng = make_rng(7);
    auto dp = sample_uniform_design(cfg.testbed, 150, rng);
    Eigen::VectorXd y = sampling_apply(dp, kv, op.apply(truth));
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.1 * normal01(rng);

    Eigen::VectorXd xr = dp.x.reverse();
    Eigen::VectorXd yr = y.reverse();
    Sample fwd{std::move(dp), y};
    Sample rev{DesignPoints::make(cfg.testbed, xr), yr};

    const auto f_bar = h_vector(Eigen::VectorXd::Zero(cfg.testbed.n));
    const auto ra = tikhonov_solve(op, fwd, f_bar, 0.05);
    const auto rb = tikhonov_solve(op, rev, f_bar, 0.05);
    const double ea = (ra.f_hat.coeffs - truth.coeffs).norm();
    const double eb = (rb.f_hat.coeffs - truth.coeffs).norm();
    CHECK(std::abs(ea - eb) < 1e-9 * (1.0 + ea));
}

TEST_CASE("fit_line: exact power data recovers the slope") {
    std::vector<double> xs, ys;
    for (double m : {250.0, 500.0, 1000.0, 2000.0, 4000.0}) {
        xs.push_back(std::log(m));
        ys.push_back(-0.25 * std::log(m) + 1.7);
    }
    const auto fit = fit_line(xs, ys);
    CHECK(fit.slope == doctest::Approx(-0.25).epsilon(1e-10));
    CHECK(fit.stderr_slope < 1e-10);
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(fit_line({1.0}, {2.0}), std::invalid_argument);
}

TEST_CASE("theoretical exponents from the corollary formulas") {
    const Eigen::VectorXd mu = KernelView::make(mini_config().testbed).mu;
    const std::vector<long> grid = {250, 500, 1000, 2000};
    CHECK(theoretical_exponent(LambdaRule::poly, 1.0, 2.0, 0.5, grid, mu) ==
          doctest::Approx(0.25).epsilon(1e-14));
    CHECK(theoretical_exponent(LambdaRule::trivial, 1.0, 2.0, 0.5, grid, mu) ==
          doctest::Approx(0.2).epsilon(1e-14));
    CHECK(theoretical_exponent(LambdaRule::log_m, 1.0, 2.0, 0.5, grid, mu) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(theoretical_exponent(LambdaRule::trivial, 1.0, 3.0, 0.5, grid, mu) ==
          doctest::Approx(0.25).epsilon(1e-14));
    // theta_general with exact N sits between the trivial and poly exponents.
    const double theta = theoretical_exponent(LambdaRule::theta_general, 1.0, 2.0, 0.5, grid, mu);
    CHECK(theta > 0.2);
    CHECK(theta < 0.3);
}

TEST_CASE("run_rate_study: mini study is deterministic and fits a sane slope") {
    const auto cfg = mini_config();
    const auto report = run_rate_study(cfg);
    REQUIRE(report.points.size() == 4);
    CHECK(report.reliable);
    CHECK(report.condition_31_ok);
    CHECK(report.theoretical_exponent == doctest::Approx(0.25));
    CHECK(report.fitted_slope > 0.05);
    CHECK(report.fitted_slope < 0.6);
    for (const auto& pt : report.points) {
        CHECK(pt.n_converged == cfg.trials_per_m);
        CHECK(pt.err_q1 <= pt.err_median);
        CHECK(pt.err_median <= pt.err_q3);
    }

    auto serial = cfg;
    serial.threads = 1;
    const auto again = run_rate_study(serial);
    for (std::size_t i = 0; i < report.points.size(); ++i) {
        CHECK(report.points[i].err_median == again.points[i].err_median);
        CHECK(report.points[i].err_q1 == again.points[i].err_q1);
        CHECK(report.points[i].lambda == again.points[i].lambda);
    }
    CHECK(report.fitted_slope == again.fitted_slope);
}

TEST_CASE("emit_report: byte-stable files and CSV round trip") {
    const auto cfg = mini_config();
    const auto report = run_rate_study(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "hsil_emit_test";
    std::filesystem::create_directories(dir);

    emit_report(report, dir.string());
    const std::string csv1 = slurp(dir / "rates.csv");
    const std::string svg1 = slurp(dir / "rates.svg");
    emit_report(report, dir.string());
    CHECK(slurp(dir / "rates.csv") == csv1);
    CHECK(slurp(dir / "rates.svg") == svg1);

    const auto points = read_rate_csv((dir / "rates.csv").string());
    REQUIRE(points.size() == report.points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        CHECK(points[i].m == report.points[i].m);
        CHECK(points[i].lambda == report.points[i].lambda);
        CHECK(points[i].err_median == report.points[i].err_median);
        CHECK(points[i].err_q1 == report.points[i].err_q1);
        CHECK(points[i].err_q3 == report.points[i].err_q3);
        CHECK(points[i].n_converged == report.points[i].n_converged);
    }

    CHECK(svg1.find("<svg") != std::string::npos);
    CHECK(svg1.find("fitted slope") != std::string::npos);

    RateReport empty;
    CHECK_THROWS_AS(emit_report(empty, dir.string()), std::invalid_argument);
    CHECK_THROWS_AS(write_rate_csv(report, "/nonexistent-dir/rates.csv"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("saturation_contrast: precondition and small smoke run") {
    auto cfg = mini_config();
    cfg.q = 2.0;
    CHECK_THROWS_AS(saturation_contrast(cfg, 1), std::invalid_argument);

    cfg.q = 3.0;
    cfg.m_grid = {100, 200, 400, 800};
    cfg.trials_per_m = 4;
    const auto report = saturation_contrast(cfg, 1);
    REQUIRE(report.seeds.size() == 1);
    CHECK(report.seeds[0].hilbert_slope != 0.0);
    CHECK(report.seeds[0].identity_slope != 0.0);
}

TEST_CASE("experiment config JSON round trip and validation") {
    auto cfg = mini_config();
    cfg.rule = LambdaRule::trivial;
    cfg.penalty_a = 0.0;
    const auto js = cfg.to_json();
    const auto back = ExperimentConfig::from_json(js);
    CHECK(back.testbed.n == cfg.testbed.n);
    CHECK(back.rule == LambdaRule::trivial);
    CHECK(back.m_grid == cfg.m_grid);
    CHECK(back.trials_per_m == cfg.trials_per_m);
    CHECK(back.root_seed == cfg.root_seed);
    CHECK(back.penalty_a == 0.0);

    auto bad = js;
    bad["q"] = 5.0;  // outside [1, 2+p]
    CHECK_THROWS(ExperimentConfig::from_json(bad));
    auto shrunk = js;
    shrunk["m_grid"] = {100, 200};
    CHECK_THROWS(ExperimentConfig::from_json(shrunk));
}
