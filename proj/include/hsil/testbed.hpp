#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace hsil {

/// Kernel eigenvalue law. The polynomial form is mu_j = mu0 * j^{-1/b};
/// an explicit list may be given instead (positive, non-increasing).
struct MuLaw {
    enum class Kind { polynomial, explicit_values };

    Kind kind = Kind::polynomial;
    double mu0 = 1.0;
    double b = 0.5;
    std::vector<double> values;

    Eigen::VectorXd realize(int n) const;
};

/// Shared spectral testbed: orthonormal trigonometric basis on [0,1] with
/// uniform design marginal, scale operator eigenvalues ell_j = j^a, and the
/// kernel eigenvalue law. Everything downstream diagonalizes in this basis.
struct TestbedSpec {
    int n = 200;
    double a = 1.0;
    MuLaw mu_law;

    void validate() const;

    /// Eigenvalue of the scale operator on the j-th basis function, j >= 1.
    double scale_eigenvalue(int j) const;

    static TestbedSpec from_json(const nlohmann::json& js);
    nlohmann::json to_json() const;
};

/// Which space a coefficient vector lives in: H uses the plain spectral
/// basis {e_j}; Hprime uses the kernel-weighted orthonormal system
/// {sqrt(mu_j) phi_j}.
enum class Space { H, Hprime };

struct CoefVector {
    Eigen::VectorXd coeffs;
    Space space = Space::H;
};

inline CoefVector h_vector(Eigen::VectorXd c) { return {std::move(c), Space::H}; }
inline CoefVector hprime_vector(Eigen::VectorXd c) { return {std::move(c), Space::Hprime}; }

/// phi_1(x) = 1, phi_{2k}(x) = sqrt(2) cos(2 pi k x),
/// phi_{2k+1}(x) = sqrt(2) sin(2 pi k x). Orthonormal in L2([0,1], dx).
double basis_eval(const TestbedSpec& spec, int j, double x);

/// Fills out(j-1) = phi_j(x) for j = 1..n. Accepts strided views so matrix
/// rows bind directly.
using BasisRowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;
void basis_row(const TestbedSpec& spec, double x, BasisRowRef out);

/// ||f||_{H_s}^2 = sum_j j^{2 a s} f_j^2. Requires an H-tagged vector.
double hs_norm(const TestbedSpec& spec, const CoefVector& f, double s);

/// Coefficient-wise scaling by j^{a s}; L^s L^{-s} = identity on the diagonal.
CoefVector apply_L_power(const TestbedSpec& spec, const CoefVector& f, double s);

/// Returns ||f||_t^{(s-r)/(s-t)} ||f||_s^{(r-t)/(s-t)} - ||f||_r for t < r < s.
/// Nonnegative for every f; zero exactly when f has a single spectral line.
double interpolation_gap(const TestbedSpec& spec, const CoefVector& f, double t, double r, double s);

}  // namespace hsil
