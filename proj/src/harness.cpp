#include "hsil/harness.hpp"

#include "hsil/diagnostics.hpp"
#include "hsil/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hsil {

namespace {

constexpr std::uint64_t kTruthTag = 0x7271ULL;
constexpr std::uint64_t kTrialTag = 0x7711ULL;
constexpr std::uint64_t kRestartTag = 0x9e57ULL;
constexpr std::uint64_t kSaturationTag = 0x5a70ULL;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double median_of_sorted(const std::vector<double>& sorted) {
    const std::size_t k = sorted.size();
    if (k % 2 == 1) return sorted[k / 2];
    return 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
}

}  // namespace

void ExperimentConfig::validate() const {
    testbed.validate();
    if (!(q >= 1.0 && q <= 2.0 + op.p))
        throw std::invalid_argument("ExperimentConfig: q must lie in [1, 2+p]");
    if (m_grid.size() < 4)
        throw std::invalid_argument("ExperimentConfig: m_grid needs >= 4 entries for slope fitting");
    for (std::size_t i = 0; i + 1 < m_grid.size(); ++i)
        if (m_grid[i] >= m_grid[i + 1])
            throw std::invalid_argument("ExperimentConfig: m_grid must be strictly increasing");
    if (trials_per_m < 1) throw std::invalid_argument("ExperimentConfig: trials_per_m must be >= 1");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& js) {
    ExperimentConfig cfg;
    cfg.testbed = TestbedSpec::from_json(js.at("testbed"));
    cfg.op = ForwardConfig::from_json(js.at("op"));
    cfg.noise = NoiseModel::from_json(js.at("noise"));
    cfg.q = js.at("q").get<double>();
    if (js.contains("b")) cfg.b = js.at("b").get<double>();
    if (js.contains("rule")) cfg.rule = lambda_rule_from_string(js.at("rule").get<std::string>());
    if (js.contains("m_grid")) cfg.m_grid = js.at("m_grid").get<std::vector<long>>();
    if (js.contains("trials_per_m")) cfg.trials_per_m = js.at("trials_per_m").get<int>();
    if (js.contains("root_seed")) cfg.root_seed = js.at("root_seed").get<std::uint64_t>();
    if (js.contains("penalty_a")) cfg.penalty_a = js.at("penalty_a").get<double>();
    if (js.contains("threads")) cfg.threads = js.at("threads").get<int>();
    if (js.contains("solver")) {
        const auto& s = js.at("solver");
        if (s.contains("tol")) cfg.solver.tol = s.at("tol").get<double>();
        if (s.contains("max_iter")) cfg.solver.max_iter = s.at("max_iter").get<int>();
        if (s.contains("max_restarts")) cfg.solver.max_restarts = s.at("max_restarts").get<int>();
    }
    cfg.validate();
    return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"testbed", testbed.to_json()},
            {"op", op.to_json()},
            {"noise", noise.to_json()},
            {"q", q},
            {"b", b},
            {"rule", to_string(rule)},
            {"m_grid", m_grid},
            {"trials_per_m", trials_per_m},
            {"root_seed", root_seed},
            {"penalty_a", penalty_a},
            {"threads", threads},
            {"solver",
             {{"tol", solver.tol}, {"max_iter", solver.max_iter}, {"max_restarts", solver.max_restarts}}}};
}

CoefVector make_truth(const TestbedSpec& spec, double q, std::uint64_t seed) {
    if (q < 1.0) throw std::invalid_argument("make_truth: q must be >= 1");
    auto rng = make_rng(derive_seed(seed, {kTruthTag}));
    Eigen::VectorXd f(spec.n);
    const double expo = spec.a * q + 0.51;
    for (int j = 1; j <= spec.n; ++j) {
        const double sign = (rng() & 1ULL) ? 1.0 : -1.0;
        f[j - 1] = sign * std::pow(static_cast<double>(j), -expo);
    }
    return h_vector(std::move(f));
}

namespace {

/// Shared immutable per-study state.
struct StudyContext {
    TestbedSpec spec;
    KernelView kv;
    ForwardOp op;
    CoefVector truth;
    Eigen::VectorXd g_rho;  // A(f_rho) in Hprime coordinates
    CoefVector f_bar;
    SolveOptions solver;

    StudyContext(const ExperimentConfig& cfg)
        : spec(cfg.testbed),
          kv(KernelView::make(cfg.testbed)),
          op(cfg.testbed, kv, cfg.op),
          truth(make_truth(cfg.testbed, cfg.q, cfg.root_seed)),
          g_rho(op.apply(truth).coeffs),
          f_bar(h_vector(Eigen::VectorXd::Zero(cfg.testbed.n))),
          solver(cfg.solver) {
        solver.penalty_a = cfg.penalty_a;
        op.set_domain_center(truth);
    }
};

TrialResult run_trial_ctx(const StudyContext& ctx, const NoiseModel& noise, long m, double lambda,
                          std::uint64_t trial_seed) {
    auto rng = make_rng(trial_seed);
    DesignPoints dp = sample_uniform_design(ctx.spec, m, rng);
    Eigen::VectorXd y = sampling_apply(dp, ctx.kv, hprime_vector(ctx.g_rho));
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sample_noise(noise, rng);
    Sample sample{std::move(dp), std::move(y)};

    SolveOptions opts = ctx.solver;
    opts.restart_seed = derive_seed(trial_seed, {kRestartTag});
    SolveResult res = tikhonov_solve(ctx.op, sample, ctx.f_bar, lambda, opts);

    TrialResult out;
    out.error_h = (res.f_hat.coeffs - ctx.truth.coeffs).norm();
    out.lambda = lambda;
    out.converged = res.converged;
    return out;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, long m, std::uint64_t trial_seed) {
    cfg.validate();
    StudyContext ctx(cfg);
    const double lambda = lambda_apriori(cfg.rule, cfg.p(), cfg.q, cfg.b, m, ctx.kv.mu);
    return run_trial_ctx(ctx, cfg.noise, m, lambda, trial_seed);
}

SlopeFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("fit_line: need matching vectors of length >= 2");
    const auto n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) throw std::invalid_argument("fit_line: degenerate abscissae");
    SlopeFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double pred = fit.intercept + fit.slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    fit.r2 = ss_tot > 1e-300 ? 1.0 - ss_res / ss_tot : 1.0;
    if (xs.size() > 2) {
        const double var_x = sxx - sx * sx / n;
        fit.stderr_slope = std::sqrt(std::max(ss_res, 0.0) / ((n - 2.0) * var_x));
    }
    return fit;
}

double theoretical_exponent(LambdaRule rule, double p, double q, double b,
                            const std::vector<long>& m_grid, const Eigen::VectorXd& mu) {
    switch (rule) {
        case LambdaRule::trivial:
            return q / (2.0 * (2.0 * p + q + 1.0));
        case LambdaRule::poly:
            return q / (2.0 * (p + q) + 2.0 * b * (p + 1.0));
        case LambdaRule::log_m:
            return q / (2.0 * (p + q));
        case LambdaRule::theta_general: {
            // err ~ lambda(m)^{q/(2(p+1))}: fit the implied exponent over the grid.
            std::vector<double> xs, ys;
            for (long m : m_grid) {
                const double lambda = lambda_apriori(rule, p, q, b, m, mu);
                xs.push_back(std::log(static_cast<double>(m)));
                ys.push_back(q / (2.0 * (p + 1.0)) * std::log(lambda));
            }
            return -fit_line(xs, ys).slope;
        }
    }
    throw std::logic_error("theoretical_exponent: unreachable");
}

RateReport run_rate_study(const ExperimentConfig& cfg) {
    cfg.validate();
    StudyContext ctx(cfg);

    RateReport report;
    report.trials_per_m = cfg.trials_per_m;
    report.rule = cfg.rule;
    report.p = cfg.p();
    report.q = cfg.q;
    report.b = cfg.b;

    std::vector<double> lambdas;
    for (long m : cfg.m_grid) {
        const double lambda = lambda_apriori(cfg.rule, cfg.p(), cfg.q, cfg.b, m, ctx.kv.mu);
        lambdas.push_back(lambda);
        if (!check_condition_31(lambda, m, ctx.kv.mu).ok) report.condition_31_ok = false;
    }

    // Fan trials out by (m index, trial index); slots keep the reduction
    // order independent of the scheduler.
    const auto n_m = cfg.m_grid.size();
    const int trials = cfg.trials_per_m;
    std::vector<std::vector<TrialResult>> results(n_m);
    for (auto& row : results) row.resize(static_cast<std::size_t>(trials));

    struct Task {
        std::size_t mi;
        int ti;
    };
    std::vector<Task> tasks;
    tasks.reserve(n_m * static_cast<std::size_t>(trials));
    // Interleave m values so workers stay busy on the heavy tail.
    for (int ti = 0; ti < trials; ++ti)
        for (std::size_t mi = 0; mi < n_m; ++mi) tasks.push_back({mi, ti});

    auto run_task = [&](const Task& task) {
        const std::uint64_t seed = derive_seed(
            cfg.root_seed, {kTrialTag, static_cast<std::uint64_t>(task.mi),
                            static_cast<std::uint64_t>(task.ti)});
        results[task.mi][static_cast<std::size_t>(task.ti)] =
            run_trial_ctx(ctx, cfg.noise, cfg.m_grid[task.mi], lambdas[task.mi], seed);
    };

    int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
    if (workers == 1) {
        for (const auto& task : tasks) run_task(task);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = static_cast<std::size_t>(w); i < tasks.size();
                     i += static_cast<std::size_t>(workers))
                    run_task(tasks[i]);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::vector<double> log_m, log_err;
    for (std::size_t mi = 0; mi < n_m; ++mi) {
        std::vector<double> errs;
        int converged = 0;
        for (const auto& r : results[mi]) {
            errs.push_back(r.error_h);
            if (r.converged) ++converged;
        }
        std::sort(errs.begin(), errs.end());
        RatePoint pt;
        pt.m = cfg.m_grid[mi];
        pt.lambda = lambdas[mi];
        pt.err_median = median_of_sorted(errs);
        pt.err_q1 = empirical_quantile(errs, 0.25);
        pt.err_q3 = empirical_quantile(errs, 0.75);
        pt.n_converged = converged;
        report.points.push_back(pt);
        if (converged < static_cast<int>(std::ceil(0.8 * trials))) report.reliable = false;

        const double md = static_cast<double>(pt.m);
        log_m.push_back(cfg.rule == LambdaRule::log_m ? std::log(md / std::log(md)) : std::log(md));
        log_err.push_back(std::log(pt.err_median));
    }

    const SlopeFit fit = fit_line(log_m, log_err);
    report.fitted_slope = -fit.slope;
    report.slope_stderr = fit.stderr_slope;
    report.theoretical_exponent =
        theoretical_exponent(cfg.rule, cfg.p(), cfg.q, cfg.b, cfg.m_grid, ctx.kv.mu);
    report.pass = std::abs(report.fitted_slope - report.theoretical_exponent) <=
                  0.4 * report.theoretical_exponent + 0.05;
    return report;
}

SaturationReport saturation_contrast(const ExperimentConfig& cfg, int num_seeds) {
    cfg.validate();
    if (!(cfg.q > 2.0 && cfg.q <= 2.0 + cfg.p()))
        throw std::invalid_argument("saturation_contrast: needs q in (2, 2+p]");
    if (num_seeds < 1) throw std::invalid_argument("saturation_contrast: needs at least one seed");

    SaturationReport report;
    report.all_ordered = true;
    for (int k = 0; k < num_seeds; ++k) {
        ExperimentConfig arm = cfg;
        arm.root_seed = derive_seed(cfg.root_seed, {kSaturationTag, static_cast<std::uint64_t>(k)});

        arm.penalty_a = cfg.penalty_a;  // configured scale penalty
        const RateReport hilbert = run_rate_study(arm);
        arm.penalty_a = 0.0;  // identity penalty; the only configuration delta
        const RateReport identity = run_rate_study(arm);

        SaturationSeedResult row;
        row.seed = arm.root_seed;
        row.hilbert_slope = hilbert.fitted_slope;
        row.identity_slope = identity.fitted_slope;
        row.ordered = row.hilbert_slope >= row.identity_slope - 0.02;
        report.all_ordered = report.all_ordered && row.ordered;
        report.seeds.push_back(row);
    }
    return report;
}

void write_rate_csv(const RateReport& report, const std::string& path) {
    if (report.points.empty()) throw std::invalid_argument("write_rate_csv: empty report");
    std::ostringstream out;
    out << "m,lambda,err_median,err_q1,err_q3,n_converged\n";
    for (const auto& pt : report.points) {
        out << pt.m << ',' << format_double(pt.lambda) << ',' << format_double(pt.err_median) << ','
            << format_double(pt.err_q1) << ',' << format_double(pt.err_q3) << ',' << pt.n_converged
            << '\n';
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("write_rate_csv: cannot open '" + path + "'");
    file << out.str();
    if (!file) throw std::runtime_error("write_rate_csv: write failed for '" + path + "'");
}

std::vector<RatePoint> read_rate_csv(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("read_rate_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(file, line)) throw std::runtime_error("read_rate_csv: empty file");
    std::vector<RatePoint> points;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        RatePoint pt;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        if (!(row >> pt.m >> pt.lambda >> pt.err_median >> pt.err_q1 >> pt.err_q3 >> pt.n_converged))
            throw std::runtime_error("read_rate_csv: malformed row '" + line + "'");
        points.push_back(pt);
    }
    return points;
}

namespace {

struct SvgMapper {
    double x_lo, x_hi, y_lo, y_hi;
    static constexpr double kLeft = 70, kRight = 610, kTop = 40, kBottom = 420;

    double map_x(double v) const { return kLeft + (v - x_lo) / (x_hi - x_lo) * (kRight - kLeft); }
    double map_y(double v) const { return kBottom - (v - y_lo) / (y_hi - y_lo) * (kBottom - kTop); }
};

std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void write_rate_svg(const RateReport& report, const std::string& path) {
    if (report.points.empty()) throw std::invalid_argument("write_rate_svg: empty report");

    std::vector<double> xs, ys;
    for (const auto& pt : report.points) {
        const double md = static_cast<double>(pt.m);
        xs.push_back(report.rule == LambdaRule::log_m ? std::log10(md / std::log(md))
                                                      : std::log10(md));
        ys.push_back(std::log10(pt.err_median));
    }
    SvgMapper mp{};
    mp.x_lo = *std::min_element(xs.begin(), xs.end()) - 0.1;
    mp.x_hi = *std::max_element(xs.begin(), xs.end()) + 0.1;
    mp.y_lo = *std::min_element(ys.begin(), ys.end()) - 0.2;
    mp.y_hi = *std::max_element(ys.begin(), ys.end()) + 0.2;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n";
    svg << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    svg << "<line x1=\"70\" y1=\"420\" x2=\"610\" y2=\"420\" stroke=\"black\"/>\n";
    svg << "<line x1=\"70\" y1=\"40\" x2=\"70\" y2=\"420\" stroke=\"black\"/>\n";
    svg << "<text x=\"300\" y=\"460\" font-size=\"14\">log10 m</text>\n";
    svg << "<text x=\"15\" y=\"230\" font-size=\"14\" transform=\"rotate(-90 15,230)\">log10 "
           "median error</text>\n";

    // Fitted and theoretical lines anchored at the first median point.
    const double x0 = xs.front(), y0 = ys.front();
    auto line = [&](double slope, const char* color, const char* dash) {
        const double yl = y0 + slope * (mp.x_lo - x0);
        const double yr = y0 + slope * (mp.x_hi - x0);
        svg << "<line x1=\"" << fmt_coord(mp.map_x(mp.x_lo)) << "\" y1=\"" << fmt_coord(mp.map_y(yl))
            << "\" x2=\"" << fmt_coord(mp.map_x(mp.x_hi)) << "\" y2=\"" << fmt_coord(mp.map_y(yr))
            << "\" stroke=\"" << color << "\"" << dash << "/>\n";
    };
    line(-report.fitted_slope, "steelblue", "");
    line(-report.theoretical_exponent, "firebrick", " stroke-dasharray=\"6,4\"");

    for (std::size_t i = 0; i < xs.size(); ++i) {
        svg << "<circle cx=\"" << fmt_coord(mp.map_x(xs[i])) << "\" cy=\"" << fmt_coord(mp.map_y(ys[i]))
            << "\" r=\"4\" fill=\"steelblue\"/>\n";
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        svg << "<text x=\"" << fmt_coord(mp.map_x(xs[i]) - 10.0) << "\" y=\"435\" font-size=\"11\">"
            << report.points[i].m << "</text>\n";
    }
    svg << "<text x=\"80\" y=\"60\" font-size=\"13\" fill=\"steelblue\">fitted slope "
        << fmt_coord(report.fitted_slope) << "</text>\n";
    svg << "<text x=\"80\" y=\"78\" font-size=\"13\" fill=\"firebrick\">theoretical "
        << fmt_coord(report.theoretical_exponent) << "</text>\n";
    svg << "</svg>\n";

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("write_rate_svg: cannot open '" + path + "'");
    file << svg.str();
    if (!file) throw std::runtime_error("write_rate_svg: write failed for '" + path + "'");
}

void emit_report(const RateReport& report, const std::string& out_dir) {
    if (report.points.empty()) throw std::invalid_argument("emit_report: empty report");
    const std::filesystem::path dir(out_dir);
    write_rate_csv(report, (dir / "rates.csv").string());
    write_rate_svg(report, (dir / "rates.svg").string());
}

}  // namespace hsil
