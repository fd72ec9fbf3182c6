#pragma once

// Independent reference computations for the unit and acceptance tests. Each
// one is written directly from its defining formula, without sharing code
// paths with the library routine it checks.

#include <aftexp/aftexp.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using aftexp::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// Random censored instance: x ~ N(0, 1) (column 0 all ones if intercept),
/// log T = x b + 0.5 N(0, 1), log C = 0.8 + N(0, 1).
inline aftexp::SurvivalSample<double> random_sample(Index n, Index p, std::uint64_t seed,
                                                    bool intercept = false, double censor_shift = 0.8)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd x(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) x(i, j) = (intercept && j == 0) ? 1.0 : z(gen);
    }
    VectorXd b(p);
    for (Index j = 0; j < p; ++j) b[j] = 0.5 * double(j % 3) - 0.4;
    VectorXd y(n);
    VectorXi d(n);
    for (Index i = 0; i < n; ++i) {
        const double log_t = x.row(i).dot(b) + 0.5 * z(gen);
        const double log_c = censor_shift + z(gen);
        d[i] = log_t <= log_c ? 1 : 0;
        y[i] = std::exp(std::min(log_t, log_c));
    }
    if (d.sum() == 0) d[0] = 1;
    return aftexp::SurvivalSample<double>(y, d, x, intercept);
}

/// Literal product over all observations with Y_i <= t; ranks counted pairwise.
inline double km_product(const VectorXd& y, const VectorXi& delta, double t, bool censoring_survival = true)
{
    const Index n = y.size();
    double prod = 1.0;
    for (Index i = 0; i < n; ++i) {
        if (!(y[i] <= t)) continue;
        const int e = censoring_survival ? 1 - delta[i] : delta[i];
        if (e == 0) continue;
        Index rank = 1;
        for (Index k = 0; k < n; ++k) {
            const bool before = y[k] < y[i] || (y[k] == y[i] && delta[k] > delta[i]) ||
                                (y[k] == y[i] && delta[k] == delta[i] && k < i);
            if (before) ++rank;
        }
        prod *= double(n - rank) / double(n - rank + 1);
    }
    return prod;
}

/// Golden-section minimum of a unimodal function on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a, double b, double tol = 1e-12)
{
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Bisection root of a nondecreasing function on [a, b].
inline double bisect_increasing(const std::function<double(double)>& f, double a, double b)
{
    for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        const double m = 0.5 * (a + b);
        if (f(m) < 0) a = m; else b = m;
    }
    return 0.5 * (a + b);
}

/// Weighted expectile objective by direct re-summation.
inline double objective_sum(const VectorXd& beta, const MatrixXd& x, const VectorXd& z, const VectorXd& w, double tau)
{
    double total = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        double fitted = 0.0;
        for (Index j = 0; j < x.cols(); ++j) fitted += x(i, j) * beta[j];
        const double r = z[i] - fitted;
        const double a = r < 0 ? 1.0 - tau : tau;
        total += w[i] * a * r * r;
    }
    return total;
}

/// Minimum of a convex objective in two coefficients: a dense grid locates the
/// basin, then nested bisection on the partial derivatives refines it.
inline VectorXd grid_refine_2d(const MatrixXd& x, const VectorXd& z, const VectorXd& w, double tau,
                               double half_width = 4.0, int grid = 201)
{
    VectorXd best = VectorXd::Zero(2);
    double best_val = objective_sum(best, x, z, w, tau);
    for (int a = 0; a < grid; ++a) {
        for (int b = 0; b < grid; ++b) {
            VectorXd v(2);
            v << -half_width + 2.0 * half_width * a / (grid - 1), -half_width + 2.0 * half_width * b / (grid - 1);
            const double val = objective_sum(v, x, z, w, tau);
            if (val < best_val) {
                best_val = val;
                best = v;
            }
        }
    }
    const double step = 2.0 * half_width / (grid - 1);
    // d/db_k of the objective is -2 sum w a(r) r x_k; increasing in b_k by convexity
    auto partial = [&](const VectorXd& v, Index k) {
        double s = 0.0;
        for (Index i = 0; i < x.rows(); ++i) {
            const double r = z[i] - x(i, 0) * v[0] - x(i, 1) * v[1];
            s += -2.0 * w[i] * (r < 0 ? 1.0 - tau : tau) * r * x(i, k);
        }
        return s;
    };
    auto inner = [&](double b0) {
        VectorXd v(2);
        v[0] = b0;
        v[1] = bisect_increasing([&](double b1) { v[1] = b1; return partial(v, 1); },
                                 best[1] - 4 * step, best[1] + 4 * step);
        return v;
    };
    const double b0 = bisect_increasing([&](double t) {
        // derivative of the profile = partial in b0 at the inner minimizer
        const VectorXd v = inner(t);
        return partial(v, 0);
    }, best[0] - 4 * step, best[0] + 4 * step);
    return inner(b0);
}

/// Martingale correction by a literal double loop over distinct censoring jump
/// times and observations.
inline MatrixXd s2_double_loop(const VectorXd& y, const VectorXi& delta, const MatrixXd& x, const VectorXd& w,
                               const VectorXd& resid, double tau, double floor)
{
    const Index n = y.size();
    const Index p = x.cols();
    MatrixXd s2 = MatrixXd::Zero(p, p);
    std::vector<double> jumps;
    for (Index i = 0; i < n; ++i) {
        if (delta[i] == 0 && std::find(jumps.begin(), jumps.end(), y[i]) == jumps.end()) jumps.push_back(y[i]);
    }
    for (double s : jumps) {
        const double before = km_product(y, delta, std::nextafter(s, 0.0));  // G(s-)
        const double after = km_product(y, delta, s);
        const double d_lambda = std::log(std::max(before, floor)) - std::log(std::max(after, floor));
        VectorXd k = VectorXd::Zero(p);
        double at_risk = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (y[i] >= s) {
                at_risk += 1.0;
                const double a = resid[i] < 0 ? 1.0 - tau : tau;
                const double gi = -2.0 * a * resid[i];
                for (Index j = 0; j < p; ++j) k[j] += w[i] * gi * x(i, j);
            }
        }
        k /= double(n);
        at_risk /= double(n);
        if (at_risk > 0) s2 += d_lambda / at_risk * k * k.transpose();
    }
    return s2;
}

} // namespace oracle
