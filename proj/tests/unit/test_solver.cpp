#include "../support/properties.hpp"

#include <doctest.h>

using namespace aftexp;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

SurvivalSample<double> intercept_only(const VectorXd& log_y)
{
    const Index n = log_y.size();
    return SurvivalSample<double>(log_y.array().exp().matrix(), VectorXi::Ones(n), MatrixXd::Ones(n, 1), true);
}

} // namespace

TEST_CASE("intercept-only fits")
{
    VectorXd z(3);
    z << 1, 2, 3;
    auto s = intercept_only(z);
    auto fit = fit_censored_expectile(s, ExpectileIndex(0.5), censoring_weights(s));
    CHECK(fit.converged);
    CHECK(fit.beta[0] == doctest::Approx(2.0).epsilon(1e-12));

    // root of 0.9 (1 - mu) = 0.1 mu
    VectorXd z2(2);
    z2 << 0, 1;
    s = intercept_only(z2);
    fit = fit_censored_expectile(s, ExpectileIndex(0.9), censoring_weights(s));
    CHECK(fit.beta[0] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("two-coefficient censored fit reaches the grid-and-bisection minimum")
{
    for (std::uint64_t seed : {31u, 32u, 33u}) {
        const auto s = oracle::random_sample(30, 2, seed);
        const auto w = censoring_weights(s);
        const double tau = 0.25 + 0.2 * double(seed - 31);
        const auto fit = fit_censored_expectile(s, ExpectileIndex(tau), w);
        const VectorXd ref = oracle::grid_refine_2d(s.x(), s.log_y(), w.w, tau);
        const double f_fit = oracle::objective_sum(fit.beta, s.x(), s.log_y(), w.w, tau);
        const double f_ref = oracle::objective_sum(ref, s.x(), s.log_y(), w.w, tau);
        CHECK(f_fit <= f_ref + 1e-8 * (1 + f_ref));
        CHECK((fit.beta - ref).norm() <= 1e-6);
    }
}

TEST_CASE("path over tau")
{
    const auto s = oracle::random_sample(80, 2, 41, true);
    const auto w = censoring_weights(s);
    const auto one = fit_path_over_tau(s, std::vector<double>{0.5}, w);
    REQUIRE(one.size() == 1);
    const auto ls = fit_censored_expectile(s, ExpectileIndex(0.5), w);
    CHECK((one[0].beta - ls.beta).norm() <= 1e-10);

    const auto twice = fit_path_over_tau(s, std::vector<double>{0.3, 0.3}, w);
    CHECK((twice[0].beta - twice[1].beta).norm() <= 1e-10);
}

TEST_CASE("symmetric errors: tau and 1 - tau intercepts mirror around the mean fit")
{
    std::mt19937_64 gen(77);
    std::normal_distribution<double> z(0.0, 1.0);
    const Index n = 20000;
    MatrixXd x(n, 2);
    VectorXd log_y(n);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = z(gen);
        log_y[i] = 1.0 + 0.5 * x(i, 1) + z(gen);
    }
    const SurvivalSample<double> s(log_y.array().exp().matrix(), VectorXi::Ones(n), x, true);
    const auto w = censoring_weights(s);
    const auto path = fit_path_over_tau(s, std::vector<double>{0.3, 0.5, 0.7}, w);
    const double lo = path[0].beta[0] - path[1].beta[0];
    const double hi = path[2].beta[0] - path[1].beta[0];
    CHECK(lo < 0);
    CHECK(std::abs(lo + hi) <= 0.03);
}

TEST_CASE("property: IRLS objective never increases")
{
    const auto out = property::irls_monotone();
    INFO(out.first_failure);
    CHECK(out.ok());
}

TEST_CASE("property: tau = 0.5 is weighted least squares")
{
    const auto out = property::half_tau_is_weighted_ls();
    INFO(out.first_failure);
    CHECK(out.ok());
}

TEST_CASE("equivariance: shifting log y by x c shifts the estimate by c")
{
    const auto s = oracle::random_sample(70, 3, 55, true);
    const auto w = censoring_weights(s);
    VectorXd c(3);
    c << 0.7, -1.1, 0.4;
    const auto shifted = s.with_log_y(s.log_y() + s.x() * c);
    const ExpectileIndex tau(0.35);
    const auto a = fit_censored_expectile(s, tau, w);
    const auto b = fit_censored_expectile(shifted, tau, w);
    CHECK((b.beta - a.beta - c).norm() <= 1e-8);
}

TEST_CASE("degenerate designs raise structured errors")
{
    VectorXd y(4);
    y << 1, 2, 3, 4;
    MatrixXd x(4, 2);
    x.col(0).setOnes();
    x.col(1).setOnes();
    const SurvivalSample<double> s(y, VectorXi::Ones(4), x);
    const auto w = censoring_weights(s);
    CHECK_THROWS_AS(fit_censored_expectile(s, ExpectileIndex(0.5), w), Error);

    SolverConfig<double> bad;
    bad.max_iter = 0;
    const auto ok = oracle::random_sample(10, 1, 1);
    CHECK_THROWS_AS(fit_censored_expectile(ok, ExpectileIndex(0.5), censoring_weights(ok), bad), Error);
}
