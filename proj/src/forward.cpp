#include "hsil/forward.hpp"

#include "hsil/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hsil {

ForwardConfig ForwardConfig::from_json(const nlohmann::json& js) {
    ForwardConfig cfg;
    const std::string kind = js.at("kind").get<std::string>();
    if (kind == "diagonal_linear") {
        cfg.kind = Kind::diagonal_linear;
        cfg.c = 0.0;
    } else if (kind == "hammerstein") {
        cfg.kind = Kind::hammerstein;
    } else {
        throw std::invalid_argument("ForwardConfig: unknown kind '" + kind + "'");
    }
    cfg.p = js.at("p").get<double>();
    if (js.contains("c")) cfg.c = js.at("c").get<double>();
    if (js.contains("grid_size")) cfg.grid_size = js.at("grid_size").get<int>();
    if (js.contains("domain_radius")) cfg.domain_radius = js.at("domain_radius").get<double>();
    return cfg;
}

nlohmann::json ForwardConfig::to_json() const {
    return {{"kind", kind == Kind::diagonal_linear ? "diagonal_linear" : "hammerstein"},
            {"p", p},
            {"c", c},
            {"grid_size", grid_size},
            {"domain_radius", domain_radius}};
}

ForwardOp::ForwardOp(const TestbedSpec& spec, const KernelView& kv, ForwardConfig cfg)
    : spec_(spec), cfg_(cfg), mu_(kv.mu), violations_(std::make_shared<std::atomic<long>>(0)) {
    spec_.validate();
    if (!(cfg_.p > 0.0)) throw std::invalid_argument("ForwardOp: p must be positive");
    if (cfg_.c < 0.0) throw std::invalid_argument("ForwardOp: c must be nonnegative");
    if (mu_.size() != spec_.n) throw std::invalid_argument("ForwardOp: kernel view mismatch");
    c_ = (cfg_.kind == ForwardConfig::Kind::diagonal_linear) ? 0.0 : cfg_.c;

    d_.resize(spec_.n);
    w_.resize(spec_.n);
    for (int j = 1; j <= spec_.n; ++j) {
        w_[j - 1] = std::pow(static_cast<double>(j), -spec_.a * cfg_.p);
        d_[j - 1] = w_[j - 1] / std::sqrt(mu_[j - 1]);
    }

    grid_ = cfg_.grid_size > 0 ? cfg_.grid_size : 4 * spec_.n;
    // Products of three truncated expansions live in modes <= 3n/2, so 2n
    // grid points already integrate them exactly.
    if (grid_ < 2 * spec_.n)
        throw std::invalid_argument("ForwardOp: grid_size below the alias-free minimum 2n");
    grid_features_.resize(grid_, spec_.n);
    for (int g = 0; g < grid_; ++g) {
        const double x = (g + 0.5) / grid_;
        basis_row(spec_, x, grid_features_.row(g));
    }
}

void ForwardOp::note_domain(const Eigen::VectorXd& f) const {
    if (!domain_center_) return;
    if ((f - *domain_center_).norm() > cfg_.domain_radius) violations_->fetch_add(1);
}

void ForwardOp::set_domain_center(const CoefVector& center) {
    if (center.space != Space::H)
        throw std::invalid_argument("ForwardOp: domain center must be an H element");
    domain_center_ = center.coeffs;
}

Eigen::VectorXd ForwardOp::square_coeffs(const Eigen::VectorXd& f) const {
    Eigen::VectorXd vals = grid_features_ * f;
    vals.array() *= vals.array();
    return grid_features_.transpose() * vals / static_cast<double>(grid_);
}

Eigen::MatrixXd ForwardOp::multiplication_matrix(const Eigen::VectorXd& f) const {
    Eigen::VectorXd vals = grid_features_ * f;
    Eigen::MatrixXd weighted = vals.asDiagonal() * grid_features_;
    return grid_features_.transpose() * weighted / static_cast<double>(grid_);
}

CoefVector ForwardOp::apply(const CoefVector& f) const {
    if (f.space != Space::H) throw std::invalid_argument("ForwardOp::apply: expects an H element");
    if (f.coeffs.size() != spec_.n) throw std::invalid_argument("ForwardOp::apply: length mismatch");
    note_domain(f.coeffs);
    Eigen::VectorXd arg = f.coeffs;
    if (c_ != 0.0) arg += c_ * square_coeffs(f.coeffs);
    return hprime_vector((d_.array() * arg.array()).matrix());
}

CoefVector ForwardOp::frechet_apply(const CoefVector& f, const CoefVector& h) const {
    if (f.space != Space::H || h.space != Space::H)
        throw std::invalid_argument("ForwardOp::frechet_apply: expects H elements");
    if (f.coeffs.size() != spec_.n || h.coeffs.size() != spec_.n)
        throw std::invalid_argument("ForwardOp::frechet_apply: length mismatch");
    note_domain(f.coeffs);
    Eigen::VectorXd arg = h.coeffs;
    if (c_ != 0.0) {
        Eigen::VectorXd fv = grid_features_ * f.coeffs;
        Eigen::VectorXd hv = grid_features_ * h.coeffs;
        arg += 2.0 * c_ * (grid_features_.transpose() * (fv.array() * hv.array()).matrix()) /
               static_cast<double>(grid_);
    }
    return hprime_vector((d_.array() * arg.array()).matrix());
}

std::pair<double, double> ForwardOp::linearization_residual(const CoefVector& f,
                                                            const CoefVector& f_ref) const {
    Eigen::VectorXd diff = f.coeffs - f_ref.coeffs;
    Eigen::VectorXd r = apply(f).coeffs - apply(f_ref).coeffs -
                        frechet_apply(f_ref, h_vector(diff)).coeffs;
    const double r_hprime = r.norm();
    const double r_l2 = (mu_.array().sqrt() * r.array()).matrix().norm();
    return {r_hprime, r_l2};
}

namespace {

Eigen::VectorXd random_direction(int n, std::mt19937_64& rng) {
    Eigen::VectorXd v(n);
    double norm_sq = 0.0;
    do {
        for (int i = 0; i < n; ++i) v[i] = normal01(rng);
        norm_sq = v.squaredNorm();
    } while (norm_sq == 0.0);
    return v / std::sqrt(norm_sq);
}

/// Largest singular value of the linear map with symmetric gram `gram`,
/// by power iteration to the given relative tolerance.
double spectral_norm_from_gram(const Eigen::MatrixXd& gram, double rel_tol = 1e-6,
                               int max_iter = 2000) {
    const auto n = gram.rows();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] += 1e-3 * static_cast<double>(i % 7);
    v.normalize();
    double value = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd next = gram * v;
        const double ray = v.dot(next);
        const double norm = next.norm();
        if (norm == 0.0) return 0.0;
        v = next / norm;
        if (it > 0 && std::abs(ray - value) <= rel_tol * std::abs(ray)) {
            value = ray;
            break;
        }
        value = ray;
    }
    return std::sqrt(std::max(value, 0.0));
}

}  // namespace

LinkEstimate link_check(const ForwardOp& op, const CoefVector& f_ref, int trials,
                        std::mt19937_64& rng) {
    if (trials < 1) throw std::invalid_argument("link_check: trials must be >= 1");
    const int n = op.spec().n;
    const auto& w = op.sampled_weight();
    LinkEstimate est;
    est.trials = trials;
    est.alpha_hat = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd g = random_direction(n, rng);
        Eigen::VectorXd dg = op.frechet_apply(f_ref, h_vector(g)).coeffs;
        const double num = (op.mu().array().sqrt() * dg.array()).matrix().norm();
        const double den = (w.array() * g.array()).matrix().norm();
        if (den == 0.0) continue;  // zero H_{-p} norm is rejected
        const double ratio = num / den;
        est.alpha_hat = std::min(est.alpha_hat, ratio);
        est.beta_hat = std::max(est.beta_hat, ratio);
    }
    return est;
}

ConstantEstimates estimate_constants(const ForwardOp& op, const CoefVector& f_ref, int trials,
                                     double radius, std::mt19937_64& rng) {
    if (trials < 1) throw std::invalid_argument("estimate_constants: trials must be >= 1");
    const int n = op.spec().n;
    const auto& d = op.smoothing_diag();
    const auto& w = op.sampled_weight();
    const double c = op.nonlinearity();

    ConstantEstimates est;

    // J_hat: operator norm of A'(f) = D (I + 2c M_f) from H to H', maximized
    // over f_ref and points on the sampled sphere of the given radius.
    auto deriv_norm = [&](const Eigen::VectorXd& f) {
        if (c == 0.0) return d.maxCoeff();
        Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n) + 2.0 * c * op.multiplication_matrix(f);
        Eigen::MatrixXd db = d.asDiagonal() * b;
        return spectral_norm_from_gram(db.transpose() * db);
    };
    est.j_hat = deriv_norm(f_ref.coeffs);

    // gamma_hat: ratio ||I_nu (A'(f_ref) - A'(f))||_{H_{-p} -> L2} / ||f_ref - f||_H.
    // The difference is 2c D M_delta, so the ratio depends on the direction only.
    double gamma = 0.0;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd dir = random_direction(n, rng);
        if (c != 0.0) {
            Eigen::MatrixXd md = op.multiplication_matrix(dir);
            // L2 target norm weights rows by sqrt(mu) d = w; H_{-p} source norm
            // is undone by scaling columns with w^{-1}.
            Eigen::MatrixXd scaled = (2.0 * c) * (w.asDiagonal() * md * w.cwiseInverse().asDiagonal());
            gamma = std::max(gamma, spectral_norm_from_gram(scaled.transpose() * scaled));
            est.j_hat = std::max(est.j_hat, deriv_norm(f_ref.coeffs + radius * dir));
        }
    }
    est.gamma_hat = gamma;

    const LinkEstimate link = link_check(op, f_ref, trials, rng);
    est.alpha_hat = link.alpha_hat;
    est.beta_hat = link.beta_hat;
    est.small_nonlinearity_ok =
        est.gamma_hat * radius <= est.alpha_hat * est.alpha_hat / (2.0 * est.beta_hat);
    return est;
}

}  // namespace hsil
