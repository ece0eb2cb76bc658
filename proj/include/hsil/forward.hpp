#pragma once

#include "hsil/rkhs.hpp"
#include "hsil/testbed.hpp"

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <atomic>
#include <memory>
#include <optional>
#include <random>
#include <utility>

namespace hsil {

struct ForwardConfig {
    enum class Kind { diagonal_linear, hammerstein };

    Kind kind = Kind::hammerstein;
    double p = 1.0;        // smoothing degree of the linear part
    double c = 0.1;        // nonlinearity strength (hammerstein)
    int grid_size = 0;     // pseudo-spectral grid; 0 means 4n
    double domain_radius = 10.0;

    static ForwardConfig from_json(const nlohmann::json& js);
    nlohmann::json to_json() const;
};

/// Nonlinear forward map A: H -> H'.
///
/// The linear part D is diagonal with d_j = j^{-ap} mu_j^{-1/2}, which makes
/// ||I_nu D h||_{L2} = ||h||_{H_{-p}} hold exactly, i.e. the link condition
/// with alpha = beta = 1. The hammerstein form is A(f) = D(f + c f*f) with
/// the pointwise square computed pseudo-spectrally on a uniform grid and
/// projected back onto the first n modes (alias-free for grid >= 2n).
class ForwardOp {
public:
    ForwardOp(const TestbedSpec& spec, const KernelView& kv, ForwardConfig cfg);

    const TestbedSpec& spec() const { return spec_; }
    const ForwardConfig& config() const { return cfg_; }
    const Eigen::VectorXd& mu() const { return mu_; }
    double nonlinearity() const { return c_; }

    /// Diagonal of D (H coordinates to Hprime coordinates).
    const Eigen::VectorXd& smoothing_diag() const { return d_; }
    /// sqrt(mu_j) d_j = j^{-ap}: the diagonal of the sampled map S_x A' at c=0.
    const Eigen::VectorXd& sampled_weight() const { return w_; }

    CoefVector apply(const CoefVector& f) const;
    CoefVector frechet_apply(const CoefVector& f, const CoefVector& h) const;

    /// Matrix of h -> P_n(f * h) in the spectral basis (symmetric).
    Eigen::MatrixXd multiplication_matrix(const Eigen::VectorXd& f) const;
    /// Coefficients of P_n(f * f).
    Eigen::VectorXd square_coeffs(const Eigen::VectorXd& f) const;

    /// Taylor remainder norms of A at f_ref:
    /// (||r||_{H'}, ||I_nu r||_{L2}) for r = A(f) - A(f_ref) - A'(f_ref)(f - f_ref).
    std::pair<double, double> linearization_residual(const CoefVector& f, const CoefVector& f_ref) const;

    /// Enables domain-ball accounting around `center`; violations are counted,
    /// never fatal (the solver may probe outside).
    void set_domain_center(const CoefVector& center);
    long domain_violations() const { return violations_->load(); }

private:
    void note_domain(const Eigen::VectorXd& f) const;

    TestbedSpec spec_;
    ForwardConfig cfg_;
    Eigen::VectorXd mu_, d_, w_;
    double c_ = 0.0;
    int grid_ = 0;
    Eigen::MatrixXd grid_features_;  // grid_ x n
    std::optional<Eigen::VectorXd> domain_center_;
    std::shared_ptr<std::atomic<long>> violations_;
};

/// Empirical frame bounds for the link condition
/// alpha ||g||_{H_{-p}} <= ||I_nu A'(f_ref) g||_{L2} <= beta ||g||_{H_{-p}}.
struct LinkEstimate {
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    int trials = 0;
};

LinkEstimate link_check(const ForwardOp& op, const CoefVector& f_ref, int trials, std::mt19937_64& rng);

struct ConstantEstimates {
    double j_hat = 0.0;      // sup of ||A'(f)||_{H -> H'} over the sampled ball
    double gamma_hat = 0.0;  // Lipschitz constant of I_nu A' into L2, H_{-p} source norm
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    bool small_nonlinearity_ok = true;  // gamma_hat * radius <= alpha^2 / (2 beta)
};

ConstantEstimates estimate_constants(const ForwardOp& op, const CoefVector& f_ref, int trials,
                                     double radius, std::mt19937_64& rng);

}  // namespace hsil
