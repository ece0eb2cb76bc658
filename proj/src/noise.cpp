#include "hsil/noise.hpp"

#include "hsil/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <stdexcept>

namespace hsil {

NoiseModel NoiseModel::from_json(const nlohmann::json& js) {
    NoiseModel model;
    const std::string kind = js.at("kind").get<std::string>();
    if (kind == "gaussian") {
        model.kind = Kind::gaussian;
    } else if (kind == "bounded_uniform") {
        model.kind = Kind::bounded_uniform;
    } else {
        throw std::invalid_argument("NoiseModel: unknown kind '" + kind + "'");
    }
    model.sigma = js.at("sigma").get<double>();
    if (model.sigma < 0.0) throw std::invalid_argument("NoiseModel: sigma must be nonnegative");
    if (js.contains("M")) model.bernstein_m = js.at("M").get<double>();
    if (js.contains("Sigma")) model.bernstein_sigma = js.at("Sigma").get<double>();
    return model;
}

nlohmann::json NoiseModel::to_json() const {
    return {{"kind", kind == Kind::gaussian ? "gaussian" : "bounded_uniform"},
            {"sigma", sigma},
            {"M", bernstein_m},
            {"Sigma", bernstein_sigma}};
}

double sample_noise(const NoiseModel& model, std::mt19937_64& rng) {
    if (model.sigma == 0.0) return 0.0;
    if (model.kind == NoiseModel::Kind::gaussian) return model.sigma * normal01(rng);
    return model.sigma * (2.0 * uniform01(rng) - 1.0);
}

namespace {

double bernstein_integrand(double t, double m_scale) {
    // e^{t/M} - t/M - 1 via expm1 to keep small-t accuracy.
    const double u = t / m_scale;
    return std::expm1(u) - u;
}

/// Adaptive Simpson on [a,b] with absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) throw std::runtime_error("certify_bernstein: quadrature did not converge");
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 60);
}

}  // namespace

BernsteinCertificate certify_bernstein(const NoiseModel& model, double m_scale, double sigma_bound) {
    if (!(m_scale > 0.0) || !(sigma_bound > 0.0))
        throw std::invalid_argument("certify_bernstein: M and Sigma must be positive");

    BernsteinCertificate cert;
    cert.budget = sigma_bound * sigma_bound / (2.0 * m_scale * m_scale);

    if (model.sigma == 0.0) {
        cert.integral = 0.0;
    } else if (model.kind == NoiseModel::Kind::bounded_uniform) {
        // |eps| ~ U[0, s]: (M/s)(e^{s/M} - 1) - s/(2M) - 1.
        const double s = model.sigma;
        cert.integral = (m_scale / s) * std::expm1(s / m_scale) - s / (2.0 * m_scale) - 1.0;
    } else {
        const double s = model.sigma;
        // Integrand peaks at t = s^2/M and is negligible 12 sigmas past it.
        const double upper = s * s / m_scale + 12.0 * s;
        auto f = [&](double t) {
            const double density = 2.0 / (s * std::sqrt(2.0 * 3.14159265358979323846)) *
                                   std::exp(-t * t / (2.0 * s * s));
            return bernstein_integrand(t, m_scale) * density;
        };
        cert.integral = integrate(f, 0.0, upper, 1e-13);
    }
    cert.slack = cert.budget - cert.integral;
    cert.holds = cert.integral <= cert.budget;
    return cert;
}

}  // namespace hsil
