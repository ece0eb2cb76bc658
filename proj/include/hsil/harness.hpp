#pragma once

#include "hsil/estimator.hpp"
#include "hsil/forward.hpp"
#include "hsil/noise.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace hsil {

/// Full description of a Monte Carlo rate study; the study is a pure
/// function of this struct (including root_seed).
struct ExperimentConfig {
    TestbedSpec testbed;
    ForwardConfig op;
    NoiseModel noise;
    double q = 2.0;
    double b = 0.5;
    LambdaRule rule = LambdaRule::poly;
    std::vector<long> m_grid = {250, 500, 1000, 2000, 4000, 8000, 16000};
    int trials_per_m = 50;
    std::uint64_t root_seed = 1u;
    double penalty_a = -1.0;  // <0: use testbed.a
    int threads = 0;          // 0: hardware concurrency
    SolveOptions solver;

    double p() const { return op.p; }
    void validate() const;

    static ExperimentConfig from_json(const nlohmann::json& js);
    nlohmann::json to_json() const;
};

/// Ground truth with smoothness sharply q: f_j = s_j j^{-(a q + 0.51)} with
/// seeded deterministic signs, so ||f||_{H_q} < infinity with margin 0.51
/// in the exponent while rougher scales diverge in the untruncated limit.
CoefVector make_truth(const TestbedSpec& spec, double q, std::uint64_t seed);

struct TrialResult {
    double error_h = 0.0;
    double lambda = 0.0;
    bool converged = false;
};

/// One end-to-end trial: draw the design and noise, form y = A(f_rho)(x)+eps,
/// pick lambda by the configured rule, solve, return the H-norm error.
TrialResult run_trial(const ExperimentConfig& cfg, long m, std::uint64_t trial_seed);

struct RatePoint {
    long m = 0;
    double lambda = 0.0;
    double err_median = 0.0;
    double err_q1 = 0.0;
    double err_q3 = 0.0;
    int n_converged = 0;
};

struct RateReport {
    std::vector<RatePoint> points;
    int trials_per_m = 0;
    double fitted_slope = 0.0;  // decay exponent: err ~ m^{-fitted_slope}
    double slope_stderr = 0.0;
    double theoretical_exponent = 0.0;
    bool pass = false;      // |fitted - theoretical| <= 0.4 theoretical + 0.05
    bool reliable = true;   // >= 80% converged trials at every m
    bool condition_31_ok = true;
    LambdaRule rule = LambdaRule::poly;
    double p = 0.0, q = 0.0, b = 0.0;
};

RateReport run_rate_study(const ExperimentConfig& cfg);

struct SaturationSeedResult {
    std::uint64_t seed = 0;
    double hilbert_slope = 0.0;
    double identity_slope = 0.0;
    bool ordered = false;  // hilbert >= identity - 0.02
};

struct SaturationReport {
    std::vector<SaturationSeedResult> seeds;
    bool all_ordered = false;
};

/// Runs the configured study twice per seed (scale penalty vs identity
/// penalty; only the penalty changes) and compares fitted slopes.
SaturationReport saturation_contrast(const ExperimentConfig& cfg, int num_seeds = 5);

/// Theoretical m-exponents from the parameter-choice corollaries; the
/// theta_general exponent is obtained numerically from the lambda sequence.
double theoretical_exponent(LambdaRule rule, double p, double q, double b,
                            const std::vector<long>& m_grid, const Eigen::VectorXd& mu);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    double r2 = 0.0;
};

SlopeFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

/// rates.csv columns: m, lambda, err_median, err_q1, err_q3, n_converged.
/// Output is byte-stable for identical reports.
void write_rate_csv(const RateReport& report, const std::string& path);
std::vector<RatePoint> read_rate_csv(const std::string& path);

/// Log-log scatter with fitted and theoretical slope lines; byte-stable.
void write_rate_svg(const RateReport& report, const std::string& path);

/// Writes rates.csv and rates.svg under out_dir; refuses empty reports
/// before touching the filesystem.
void emit_report(const RateReport& report, const std::string& out_dir);

}  // namespace hsil
