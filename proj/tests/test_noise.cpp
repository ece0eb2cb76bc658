#include "hsil/noise.hpp"

#include "hsil/rng.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>

using namespace hsil;

TEST_CASE("sample_noise: bounded support and degenerate scale") {
    NoiseModel bounded;
    bounded.kind = NoiseModel::Kind::bounded_uniform;
    bounded.sigma = 0.3;
    auto rng = make_rng(1);
    for (int i = 0; i < 20000; ++i) {
        const double eps = sample_noise(bounded, rng);
        CHECK(eps >= -0.3);
        CHECK(eps <= 0.3);
    }

    NoiseModel degenerate;
    degenerate.sigma = 0.0;
    for (int i = 0; i < 10; ++i) CHECK(sample_noise(degenerate, rng) == 0.0);
}

TEST_CASE("sample_noise: gaussian mean and variance over 1e6 draws") {
    NoiseModel model;  // gaussian sigma=0.1
    auto rng = make_rng(2);
    const int draws = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double eps = sample_noise(model, rng);
        sum += eps;
        sum_sq += eps * eps;
    }
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    const double se = model.sigma / std::sqrt(static_cast<double>(draws));
    CHECK(std::abs(mean) < 4.0 * se);
    CHECK(var == doctest::Approx(0.01).epsilon(0.01));
}

TEST_CASE("certify_bernstein: bounded uniform closed form") {
    NoiseModel bounded;
    bounded.kind = NoiseModel::Kind::bounded_uniform;
    const double s = 0.25;
    bounded.sigma = s;
    // Worst case |eps| = s gives e - 2, so M = s, Sigma^2 = 2 s^2 (e - 2)
    // holds with slack.
    const double sigma_cert = s * std::sqrt(2.0 * (std::exp(1.0) - 2.0));
    const auto cert = certify_bernstein(bounded, s, sigma_cert);
    CHECK(cert.holds);
    CHECK(cert.slack >= 0.0);
    // Closed form of the integral: (M/s)(e^{s/M}-1) - s/(2M) - 1 at M = s.
    const double expected = std::exp(1.0) - 2.5;
    CHECK(cert.integral == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("certify_bernstein: gaussian quadrature against the erfc closed form") {
    NoiseModel model;  // gaussian sigma = 0.1
    const double sigma = model.sigma, m_scale = 0.4, sigma_bound = 0.2;
    const auto cert = certify_bernstein(model, m_scale, sigma_bound);
    CHECK(cert.holds);

    // E e^{|eps|/M} = 2 e^{sigma^2/(2M^2)} Phi(sigma/M), E|eps| = sigma sqrt(2/pi).
    const double ratio = sigma / m_scale;
    const double phi = 0.5 * std::erfc(-ratio / std::sqrt(2.0));
    const double closed =
        2.0 * std::exp(0.5 * ratio * ratio) * phi - sigma * std::sqrt(2.0 / 3.14159265358979323846) / m_scale - 1.0;
    CHECK(cert.integral == doctest::Approx(closed).epsilon(1e-10));
    CHECK(cert.budget == doctest::Approx(sigma_bound * sigma_bound / (2.0 * m_scale * m_scale)));
}

TEST_CASE("certify_bernstein: zero noise holds for any pair, invalid pairs throw") {
    NoiseModel model;
    model.sigma = 0.0;
    const auto cert = certify_bernstein(model, 0.01, 0.01);
    CHECK(cert.holds);
    CHECK(cert.integral == 0.0);
    CHECK_THROWS_AS(certify_bernstein(model, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(certify_bernstein(model, 0.1, -1.0), std::invalid_argument);
}

TEST_CASE("certify_bernstein: re-certification is idempotent") {
    NoiseModel model;  // defaults carry the certified pair (0.4, 0.2)
    const auto first = certify_bernstein(model, model.bernstein_m, model.bernstein_sigma);
    const auto second = certify_bernstein(model, model.bernstein_m, model.bernstein_sigma);
    CHECK(first.holds == second.holds);
    CHECK(first.integral == second.integral);
    CHECK(first.slack == second.slack);
}

TEST_CASE("noise model JSON round trip") {
    NoiseModel model;
    model.kind = NoiseModel::Kind::bounded_uniform;
    model.sigma = 0.5;
    model.bernstein_m = 0.5;
    model.bernstein_sigma = 0.6;
    const auto back = NoiseModel::from_json(model.to_json());
    CHECK(back.kind == model.kind);
    CHECK(back.sigma == model.sigma);
    CHECK(back.bernstein_m == model.bernstein_m);
    CHECK(back.bernstein_sigma == model.bernstein_sigma);

    nlohmann::json bad = {{"kind", "cauchy"}, {"sigma", 1.0}};
    CHECK_THROWS(NoiseModel::from_json(bad));
}
