#include "hsil/diagnostics.hpp"
#include "hsil/harness.hpp"
#include "hsil/rng.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("cannot open '" + path + "'");
    json js;
    file >> js;
    return js;
}

/// Grid syntax lo:hi:logN, e.g. 1e-5:1e-1:log20.
std::vector<double> parse_lambda_grid(const std::string& text) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw std::runtime_error("lambda grid must look like 1e-5:1e-1:log20");
    const double lo = std::stod(text.substr(0, c1));
    const double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    std::string tail = text.substr(c2 + 1);
    if (tail.rfind("log", 0) != 0) throw std::runtime_error("only log-spaced grids are supported");
    const int count = std::stoi(tail.substr(3));
    return hsil::log_lambda_grid(lo, hi, count);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    int threads = 0;
};

hsil::ExperimentConfig load_config(const GlobalArgs& g) {
    if (g.config_path.empty()) throw std::runtime_error("--config is required for this subcommand");
    auto cfg = hsil::ExperimentConfig::from_json(load_json(g.config_path));
    if (g.seed) cfg.root_seed = *g.seed;
    if (g.threads > 0) cfg.threads = g.threads;
    return cfg;
}

int cmd_effdim(const GlobalArgs& g, const std::string& spec_path, const std::string& grid_text,
               const std::string& out_path) {
    hsil::TestbedSpec spec;
    if (!spec_path.empty()) {
        spec = hsil::TestbedSpec::from_json(load_json(spec_path));
    } else {
        spec = load_config(g).testbed;
    }
    const auto kv = hsil::KernelView::make(spec);
    const auto grid = parse_lambda_grid(grid_text);
    const auto fit = hsil::classify_decay(kv.mu, grid);
    const double trace = kv.mu.sum();

    std::string regime = "neither";
    if (fit.regime == hsil::DecayRegime::polynomial)
        regime = "polynomial(b=" + fmt(fit.b_hat) + ")";
    else if (fit.regime == hsil::DecayRegime::logarithmic)
        regime = "logarithmic";

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "'");
    out << "lambda,n_eff,trivial_bound,regime_fit\n";
    for (double lambda : grid) {
        out << fmt(lambda) << ',' << fmt(hsil::effective_dimension(kv.mu, lambda)) << ','
            << fmt(trace / lambda) << ',' << regime << '\n';
    }
    std::cout << "effdim: " << grid.size() << " lambdas -> " << out_path << " (regime " << regime
              << ")\n";
    return 0;
}

int cmd_solve(const GlobalArgs& g, const std::string& testbed_path, const std::string& op_path,
              const std::string& noise_path, long m, const std::string& rule_name, double p,
              double q, double b, std::uint64_t seed, const std::string& out_path) {
    auto spec = hsil::TestbedSpec::from_json(load_json(testbed_path));
    auto op_cfg = hsil::ForwardConfig::from_json(load_json(op_path));
    auto noise = hsil::NoiseModel::from_json(load_json(noise_path));
    if (p > 0.0) op_cfg.p = p;

    hsil::ExperimentConfig cfg;
    cfg.testbed = spec;
    cfg.op = op_cfg;
    cfg.noise = noise;
    cfg.q = q;
    cfg.b = b;
    cfg.rule = hsil::lambda_rule_from_string(rule_name);
    cfg.root_seed = g.seed.value_or(seed);

    const auto kv = hsil::KernelView::make(spec);
    hsil::ForwardOp op(spec, kv, op_cfg);
    auto truth = hsil::make_truth(spec, q, cfg.root_seed);
    op.set_domain_center(truth);
    const double lambda = hsil::lambda_apriori(cfg.rule, op_cfg.p, q, b, m, kv.mu);

    auto rng = hsil::make_rng(hsil::derive_seed(cfg.root_seed, {0x7711ULL, 0, 0}));
    auto dp = hsil::sample_uniform_design(spec, m, rng);
    Eigen::VectorXd y = hsil::sampling_apply(dp, kv, op.apply(truth));
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += hsil::sample_noise(noise, rng);
    hsil::Sample sample{std::move(dp), std::move(y)};

    auto f_bar = hsil::h_vector(Eigen::VectorXd::Zero(spec.n));
    auto res = hsil::tikhonov_solve(op, sample, f_bar, lambda);
    const double err = (res.f_hat.coeffs - truth.coeffs).norm();

    json out = {{"lambda", res.lambda},
                {"converged", res.converged},
                {"iterations", res.iterations},
                {"objective", res.objective},
                {"objective_trace", res.objective_trace},
                {"error_h", err},
                {"f_hat", std::vector<double>(res.f_hat.coeffs.data(),
                                              res.f_hat.coeffs.data() + res.f_hat.coeffs.size())}};
    std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open '" + out_path + "'");
    file << out.dump(2) << '\n';
    std::cout << "solve: m=" << m << " lambda=" << res.lambda << " iterations=" << res.iterations
              << " converged=" << (res.converged ? "yes" : "no") << " error_h=" << err << '\n';
    return 0;
}

int cmd_diagnose(const GlobalArgs& g, long m, double lambda, int trials, double eta,
                 const std::string& out_path) {
    auto cfg = load_config(g);
    const auto kv = hsil::KernelView::make(cfg.testbed);
    hsil::ForwardOp op(cfg.testbed, kv, cfg.op);
    auto truth = hsil::make_truth(cfg.testbed, cfg.q, cfg.root_seed);
    op.set_domain_center(truth);

    auto report = hsil::concentration_study(op, kv, cfg.noise, truth, m, lambda, trials, eta,
                                            cfg.root_seed, cfg.threads);

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "'");
    out << "trial,theta_z,psi_x,psi_x_hs,gamma_x\n";
    for (std::size_t t = 0; t < report.rows.size(); ++t) {
        const auto& r = report.rows[t];
        out << t << ',' << fmt(r.theta_z) << ',' << fmt(r.psi_x) << ',' << fmt(r.psi_x_hs) << ','
            << fmt(r.gamma_x) << '\n';
    }
    out << "summary,q" << fmt(1.0 - eta) << "_theta=" << fmt(report.theta_a1.quantile)
        << " bound=" << fmt(report.theta_a1.bound) << ",q_psi_hs=" << fmt(report.psi_hs_a1.quantile)
        << " boundA1=" << fmt(report.psi_hs_a1.bound) << " boundA2=" << fmt(report.psi_hs_a2.bound)
        << ",q_gamma=" << fmt(report.gamma_a2.quantile) << " bound=" << fmt(report.gamma_a2.bound)
        << '\n';

    std::cout << "diagnose: m=" << m << " lambda=" << lambda << " trials=" << trials << '\n'
              << "  theta_z   q" << 100 * (1 - eta) << "=" << report.theta_a1.quantile
              << "  bound=" << report.theta_a1.bound << (report.theta_a1.ok ? "  ok" : "  VIOLATED")
              << '\n'
              << "  psi_x_hs  q" << 100 * (1 - eta) << "=" << report.psi_hs_a1.quantile
              << "  boundA1=" << report.psi_hs_a1.bound
              << (report.psi_hs_a1.ok ? "  ok" : "  VIOLATED")
              << "  boundA2=" << report.psi_hs_a2.bound
              << (report.psi_hs_a2.ok ? "  ok" : "  VIOLATED") << '\n'
              << "  gamma_x   q" << 100 * (1 - eta) << "=" << report.gamma_a2.quantile
              << "  bound=" << report.gamma_a2.bound << (report.gamma_a2.ok ? "  ok" : "  VIOLATED")
              << '\n';
    if (!report.condition_31_ok)
        std::cout << "  note: (m, lambda) violates the N(lambda) <= m lambda precondition\n";
    return report.all_ok() ? 0 : 2;
}

int cmd_rates(const GlobalArgs& g) {
    auto cfg = load_config(g);
    auto report = hsil::run_rate_study(cfg);
    std::filesystem::create_directories(g.out_dir);
    hsil::emit_report(report, g.out_dir);

    std::cout << "rates: rule=" << hsil::to_string(report.rule) << " p=" << report.p
              << " q=" << report.q << " b=" << report.b << '\n';
    for (const auto& pt : report.points)
        std::cout << "  m=" << pt.m << " lambda=" << pt.lambda << " median=" << pt.err_median
                  << " [" << pt.err_q1 << ", " << pt.err_q3 << "] converged=" << pt.n_converged
                  << '\n';
    std::cout << "  fitted slope " << report.fitted_slope << " (stderr " << report.slope_stderr
              << "), theoretical " << report.theoretical_exponent
              << (report.pass ? "  PASS" : "  FAIL") << (report.reliable ? "" : "  UNRELIABLE")
              << '\n';
    if (!report.condition_31_ok) std::cout << "  note: condition N(lambda) <= m lambda failed\n";
    return report.pass ? 0 : 2;
}

int cmd_saturation(const GlobalArgs& g, int seeds) {
    auto cfg = load_config(g);
    auto report = hsil::saturation_contrast(cfg, seeds);

    std::filesystem::create_directories(g.out_dir);
    const auto csv = std::filesystem::path(g.out_dir) / "saturation.csv";
    std::ofstream out(csv, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + csv.string() + "'");
    out << "seed,hilbert_slope,identity_slope,ordered\n";
    for (const auto& row : report.seeds)
        out << row.seed << ',' << fmt(row.hilbert_slope) << ',' << fmt(row.identity_slope) << ','
            << (row.ordered ? 1 : 0) << '\n';

    std::cout << "saturation: q=" << cfg.q << " p=" << cfg.p() << '\n';
    for (const auto& row : report.seeds)
        std::cout << "  seed=" << row.seed << " hilbert=" << row.hilbert_slope
                  << " identity=" << row.identity_slope << (row.ordered ? "  ok" : "  INVERTED")
                  << '\n';
    std::cout << (report.all_ordered ? "  ordering stable\n" : "  ordering violated\n");
    return report.all_ordered ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hilbert-scale Tikhonov regularization testbed"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "experiment config JSON")->envname("HSIL_CONFIG");
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "root seed override");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--threads", g.threads, "worker threads (0 = hardware)");

    auto* effdim = app.add_subcommand("effdim", "effective dimension over a lambda grid");
    std::string spec_path, grid_text = "1e-5:1e-1:log20", effdim_out = "effdim.csv";
    effdim->add_option("--spec", spec_path, "testbed spec JSON");
    effdim->add_option("--lambda-grid", grid_text, "grid as lo:hi:logN");
    effdim->add_option("--out", effdim_out, "output CSV");

    auto* solve = app.add_subcommand("solve", "single Tikhonov solve on synthetic data");
    std::string testbed_path, op_path, noise_path, rule_name = "poly", solve_out = "solve.json";
    long solve_m = 2000;
    double solve_p = 0.0, solve_q = 2.0, solve_b = 0.5;
    std::uint64_t solve_seed = 7;
    solve->add_option("--testbed", testbed_path, "testbed spec JSON")->required();
    solve->add_option("--op", op_path, "operator config JSON")->required();
    solve->add_option("--noise", noise_path, "noise config JSON")->required();
    solve->add_option("--m", solve_m, "sample size");
    solve->add_option("--rule", rule_name, "lambda rule");
    solve->add_option("--p", solve_p, "smoothing degree override");
    solve->add_option("--q", solve_q, "source smoothness");
    solve->add_option("--b", solve_b, "effective-dimension decay parameter");
    solve->add_option("--seed", solve_seed, "seed");
    solve->add_option("--out", solve_out, "output JSON");

    auto* diagnose = app.add_subcommand("diagnose", "concentration quantile study");
    long diag_m = 1000;
    double diag_lambda = 0.01, diag_eta = 0.1;
    int diag_trials = 500;
    std::string diag_out = "diag.csv";
    diagnose->add_option("--m", diag_m, "sample size per trial");
    diagnose->add_option("--lambda", diag_lambda, "regularization level");
    diagnose->add_option("--trials", diag_trials, "number of trials");
    diagnose->add_option("--eta", diag_eta, "confidence parameter");
    diagnose->add_option("--out", diag_out, "output CSV");

    auto* rates = app.add_subcommand("rates", "Monte Carlo convergence-rate study");
    auto* saturation = app.add_subcommand("saturation", "scale penalty vs identity penalty");
    int sat_seeds = 5;
    saturation->add_option("--seeds", sat_seeds, "number of independent seeds");

    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (effdim->parsed()) return cmd_effdim(g, spec_path, grid_text, effdim_out);
        if (solve->parsed())
            return cmd_solve(g, testbed_path, op_path, noise_path, solve_m, rule_name, solve_p,
                             solve_q, solve_b, solve_seed, solve_out);
        if (diagnose->parsed()) return cmd_diagnose(g, diag_m, diag_lambda, diag_trials, diag_eta, diag_out);
        if (rates->parsed()) return cmd_rates(g);
        if (saturation->parsed()) return cmd_saturation(g, sat_seeds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
