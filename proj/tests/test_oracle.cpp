#include "doctest.h"
#include "support.hpp"

#include "blr/errors.hpp"
#include "blr/oracle.hpp"

#include <cmath>
#include <numeric>

using namespace blr;

TEST_CASE("quadrature integrates Gaussians exactly") {
    const auto one = oracle::quadrature_lml(
        [](const std::vector<long double> &x) { return -0.5L * x[0] * x[0]; }, {{-12.0, 12.0}}, 81);
    CHECK(one.value == doctest::Approx(0.5 * kLog2Pi).epsilon(1e-12));
    const auto three = oracle::quadrature_lml(
        [](const std::vector<long double> &x) {
            return -0.5L * (x[0] * x[0] / 4.0L + x[1] * x[1] + x[2] * x[2] / 0.25L);
        },
        {{-24.0, 24.0}, {-12.0, 12.0}, {-6.0, 6.0}}, 61);
    CHECK(three.value == doctest::Approx(1.5 * kLog2Pi).epsilon(1e-10));
    CHECK(three.error_estimate < 1e-8);
}

TEST_CASE("quadrature refuses a box that cuts off mass") {
    try {
        oracle::quadrature_lml([](const std::vector<long double> &x) { return -0.5L * x[0] * x[0]; }, {{-3.0, 3.0}},
                               41);
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::BoundsTooNarrow);
    }
    CHECK_THROWS_AS(oracle::quadrature_lml([](const auto &) { return 0.0L; }, {{0.0, 1.0}}, 40), DataError);
    CHECK_THROWS_AS(oracle::quadrature_lml([](const auto &) { return 0.0L; }, {}, 41), DataError);
}

TEST_CASE("stage one quadrature agrees with a plain Simpson rule") {
    const auto d = testing::random_stage1(3, 25, {0.7});
    const PriorSpec prior{9.0, 1.0, 1.0};
    const auto q = oracle::quadrature_lml_stage1(d.x, d.outcome, prior, 81);
    // intercept only: integrate the double-precision joint directly
    const int n = 20001;
    const double lo = -30.0, hi = 30.0, h = (hi - lo) / (n - 1);
    std::vector<double> logs(n);
    for (int i = 0; i < n; ++i) {
        logs[static_cast<std::size_t>(i)] =
            log_joint_stage1(Eigen::VectorXd::Constant(1, lo + h * i), d.x, d.outcome, prior).value;
    }
    const double peak = *std::max_element(logs.begin(), logs.end());
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        sum += w * std::exp(logs[static_cast<std::size_t>(i)] - peak);
    }
    CHECK(q.value == doctest::Approx(peak + std::log(sum * h / 3.0)).epsilon(1e-9));
}

TEST_CASE("importance sampling agrees with quadrature at fixed sigma2") {
    const auto d = testing::random_stage2(12, 2, 3, 0.2, 0.0, 1.0);
    const auto g = make_grouped_design(d);
    const Eigen::MatrixXd x = g.x.leftCols(1);
    const PriorSpec prior{4.0, 1.0, 1.0};
    const double sigma2 = 0.8;
    const auto q = oracle::quadrature_lml(
        [&](const std::vector<long double> &v) {
            Eigen::VectorXd latent(3);
            latent << static_cast<double>(v[0]), static_cast<double>(v[1]), static_cast<double>(v[2]);
            return oracle::log_joint_stage2(latent, x, g.group, d.outcome, prior, sigma2);
        },
        {{-12.0, 12.0}, {-12.0, 12.0}, {-12.0, 12.0}}, 81);
    oracle::ImportanceSettings s;
    s.n_samples = 100000;
    const Eigen::MatrixXd scale = Eigen::MatrixXd::Identity(3, 3);
    const auto is =
        oracle::importance_lml_fixed_sigma2(x, g.group, d.outcome, prior, sigma2, Eigen::VectorXd::Zero(3), scale, s);
    CHECK(std::abs(is.value - q.value) < 3.0 * is.error_estimate + q.error_estimate + 1e-3);
    CHECK(is.error_estimate < 0.01);
}

TEST_CASE("importance sampling over sigma2 is reproducible and self-consistent") {
    const auto d = testing::random_stage2(14, 12, 3, -0.3, 0.6, 0.7);
    const auto g = make_grouped_design(d);
    const auto fit = fit_stage2(d, PriorSpec{});
    oracle::ImportanceSettings s;
    s.n_samples = 40000;
    const auto a = oracle::importance_lml(g.x, g.group, d.outcome, PriorSpec{}, fit, s);
    const auto again = oracle::importance_lml(g.x, g.group, d.outcome, PriorSpec{}, fit, s);
    CHECK(a.value == again.value);
    s.seed = 2;
    const auto b = oracle::importance_lml(g.x, g.group, d.outcome, PriorSpec{}, fit, s);
    CHECK(std::abs(a.value - b.value) < 4.0 * std::hypot(a.error_estimate, b.error_estimate) + 1e-9);

    s.n_samples = 20;
    try {
        oracle::importance_lml(g.x, g.group, d.outcome, PriorSpec{}, fit, s);
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::EffectiveSampleTooSmall);
    }
}

TEST_CASE("pair counting") {
    CHECK(oracle::pair_count_auc({1, 0, 1, 0}, {0.9, 0.9, 0.3, 0.1}).value == 0.625);
    CHECK_THROWS_AS(oracle::pair_count_auc({1, 1}, {0.2, 0.3}), DataError);
}

TEST_CASE("finite differences") {
    const auto f = [](const Eigen::VectorXd &v) { return std::sin(v[0]) * std::exp(v[1]); };
    Eigen::VectorXd x(2);
    x << 0.4, -0.3;
    const auto g = oracle::fd_gradient(f, x);
    CHECK(g[0] == doctest::Approx(std::cos(0.4) * std::exp(-0.3)).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(std::sin(0.4) * std::exp(-0.3)).epsilon(1e-9));
    const auto h = oracle::fd_hessian(f, x);
    CHECK(h(0, 1) == doctest::Approx(std::cos(0.4) * std::exp(-0.3)).epsilon(1e-6));
    CHECK(h(0, 0) == doctest::Approx(-std::sin(0.4) * std::exp(-0.3)).epsilon(1e-6));
    const auto j = oracle::fd_jacobian([](const Eigen::VectorXd &v) { return Eigen::VectorXd(v.array().square()); },
                                       x);
    CHECK(j(0, 0) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(j(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("Gauss-Hermite rule") {
    const auto [nodes, weights] = oracle::gauss_hermite(20);
    const double sqrt_pi = std::sqrt(std::acos(-1.0));
    CHECK(std::accumulate(weights.begin(), weights.end(), 0.0) == doctest::Approx(sqrt_pi).epsilon(1e-13));
    double second = 0.0, fourth = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        second += weights[k] * nodes[k] * nodes[k];
        fourth += weights[k] * std::pow(nodes[k], 4);
    }
    CHECK(second == doctest::Approx(sqrt_pi / 2.0).epsilon(1e-12));
    CHECK(fourth == doctest::Approx(3.0 * sqrt_pi / 4.0).epsilon(1e-12));
}

TEST_CASE("expected logistic agrees with a Riemann sum") {
    const double eta = 0.8, sigma2 = 2.3;
    const double sd = std::sqrt(sigma2);
    double sum = 0.0;
    const double h = 1e-3;
    for (double z = -12.0; z <= 12.0; z += h) {
        sum += h * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::acos(-1.0)) * inv_logit(eta + sd * z);
    }
    CHECK(oracle::expected_inv_logit(eta, sigma2) == doctest::Approx(sum).epsilon(1e-9));
}

TEST_CASE("golden section and high precision helpers") {
    CHECK(oracle::golden_section_max([](double x) { return -(x - 1.3) * (x - 1.3); }, -5.0, 5.0) ==
          doctest::Approx(1.3).epsilon(1e-8));
    const auto w = oracle::hp_softmax({-1000.0, -1000.0, -1001.0});
    CHECK(w[0] == w[1]);
    CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(oracle::hp_inv_logit(0.0) == 0.5);
    CHECK(oracle::hp_log_inverse_gamma(1.0, 1.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
}
