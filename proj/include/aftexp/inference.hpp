#pragma once

#include <aftexp/alasso.hpp>
#include <aftexp/error.hpp>
#include <aftexp/loss.hpp>
#include <aftexp/parallel.hpp>
#include <aftexp/random.hpp>
#include <aftexp/sample.hpp>
#include <aftexp/solver.hpp>
#include <aftexp/survival.hpp>
#include <aftexp/types.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace aftexp {

/// Standard normal quantile (Acklam's rational approximation plus one Halley step).
inline double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::Usage, "normal quantile needs p in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double low = 0.02425;
    double x;
    if (p < low) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

/**
 * Empirical counterparts of the sandwich pieces:
 *   s1 = n^-1 sum_i (delta_i / G^2(Y_i)) g^2(r_i) x_i x_i'
 *   s2 = sum_s k(s) k(s)' / y(s) dLambda_C(s)   over the curve's jumps
 *   s3 = n^-1 sum_i (delta_i / G(Y_i)) h(r_i) x_i x_i'
 *   sigma = s3^-1 (s1 + s2) s3^-1 / n
 */
template <class Scalar = double>
struct AsymptoticPieces
{
    Mat<Scalar> s1_hat;
    Mat<Scalar> s2_hat;
    Mat<Scalar> s3_hat;
    Mat<Scalar> sigma_hat;
    Index n = 0;
};

enum class CovarianceMethod
{
    PlugIn,
    Bootstrap
};

template <class Scalar = double>
struct CovarianceEstimate
{
    CovarianceMethod method = CovarianceMethod::PlugIn;
    Mat<Scalar> cov;
    Vec<Scalar> se;
    int replications = 0;  // bootstrap replicates kept
    int dropped = 0;       // bootstrap replicates that failed to fit
    std::uint64_t seed = 0;
};

namespace detail {

template <class Scalar>
Mat<Scalar> symmetrized(const Mat<Scalar>& m)
{
    return (m + m.transpose()) / Scalar(2);
}

template <class Scalar>
Mat<Scalar> sandwich(const Mat<Scalar>& bread, const Mat<Scalar>& meat, Index n)
{
    Eigen::LLT<Mat<Scalar>> llt(bread);
    if (llt.info() != Eigen::Success || llt.rcond() < Scalar(1e-14)) {
        throw Error(ErrorKind::Numerical,
                    "curvature matrix is singular; use a ridge or more data");
    }
    const Mat<Scalar> inv = llt.solve(Mat<Scalar>::Identity(bread.rows(), bread.cols()));
    return symmetrized<Scalar>(inv * meat * inv / Scalar(n));
}

template <class Scalar>
Mat<Scalar> sub_block(const Mat<Scalar>& m, const IndexSet& idx)
{
    const auto k = static_cast<Index>(idx.size());
    Mat<Scalar> out(k, k);
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) out(a, b) = m(idx[a], idx[b]);
    return out;
}

} // namespace detail

/// Martingale correction s2 on its own (exposed for oracle checks).
template <class Scalar>
Mat<Scalar> censoring_martingale_term(const SurvivalSample<Scalar>& sample,
                                      const Vec<Scalar>& residuals,
                                      const KaplanMeierCurve<Scalar>& curve,
                                      const IpcwWeights<Scalar>& weights,
                                      const ExpectileIndex<Scalar>& tau)
{
    const Index n = sample.n();
    const Index p = sample.p();
    Mat<Scalar> s2 = Mat<Scalar>::Zero(p, p);
    const auto& times = curve.jump_times();
    if (times.empty()) return s2;

    // Walk jump times from the largest down, accumulating rows with Y_i >= s.
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return sample.y()[a] > sample.y()[b]; });
    Vec<Scalar> k_sum = Vec<Scalar>::Zero(p);
    Index at_risk = 0;
    std::size_t pos = 0;
    const Scalar floor = weights.floor;
    for (std::size_t jj = times.size(); jj-- > 0;) {
        const Scalar s = times[jj];
        while (pos < order.size() && sample.y()[order[pos]] >= s) {
            const Index i = order[pos++];
            if (weights.w[i] != Scalar(0)) {
                k_sum += weights.w[i] * g(tau, residuals[i]) * sample.x().row(i).transpose();
            }
            ++at_risk;
        }
        if (at_risk == 0 || k_sum.isZero(0)) continue;
        const Scalar before = std::max(curve.value_before(jj), floor);
        const Scalar after = std::max(curve.values()[jj], floor);
        const Scalar d_lambda = std::log(before) - std::log(after);
        const Vec<Scalar> k_hat = k_sum / Scalar(n);
        const Scalar y_hat = Scalar(at_risk) / Scalar(n);
        s2.noalias() += (d_lambda / y_hat) * (k_hat * k_hat.transpose());
    }
    return detail::symmetrized<Scalar>(s2);
}

template <class Scalar>
AsymptoticPieces<Scalar> plug_in_covariance(const SurvivalSample<Scalar>& sample,
                                            const FitResult<Scalar>& fit,
                                            const KaplanMeierCurve<Scalar>& curve,
                                            const IpcwWeights<Scalar>& weights)
{
    detail::check_length("fit coefficients", fit.beta.size(), sample.p());
    detail::check_length("weights", weights.w.size(), sample.n());
    const Index n = sample.n();
    const auto& tau = fit.tau;
    const Vec<Scalar> r = residuals(fit.beta, sample);

    Vec<Scalar> score_sq(n);
    Vec<Scalar> curvature(n);
    for (Index i = 0; i < n; ++i) {
        const Scalar w = weights.w[i];
        const Scalar gi = g(tau, r[i]);
        score_sq[i] = w * w * gi * gi;
        curvature[i] = w * h(tau, r[i]);
    }
    AsymptoticPieces<Scalar> out;
    out.n = n;
    const auto& x = sample.x();
    out.s1_hat = detail::symmetrized<Scalar>(x.transpose() * score_sq.asDiagonal() * x / Scalar(n));
    out.s3_hat = detail::symmetrized<Scalar>(x.transpose() * curvature.asDiagonal() * x / Scalar(n));
    out.s2_hat = censoring_martingale_term(sample, r, curve, weights, tau);
    out.sigma_hat = detail::sandwich<Scalar>(out.s3_hat, out.s1_hat + out.s2_hat, n);
    return out;
}

/// Sandwich restricted to a coordinate subset (the selected set of an adaptive-LASSO fit).
template <class Scalar>
Mat<Scalar> restricted_sigma(const AsymptoticPieces<Scalar>& pieces, const IndexSet& idx)
{
    const Mat<Scalar> s3 = detail::sub_block(pieces.s3_hat, idx);
    const Mat<Scalar> meat = detail::sub_block(pieces.s1_hat, idx) + detail::sub_block(pieces.s2_hat, idx);
    return detail::sandwich<Scalar>(s3, meat, pieces.n);
}

template <class Scalar>
CovarianceEstimate<Scalar> as_estimate(const Mat<Scalar>& cov, CovarianceMethod method)
{
    CovarianceEstimate<Scalar> est;
    est.method = method;
    est.cov = cov;
    est.se = cov.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
    return est;
}

template <class Scalar>
CovarianceEstimate<Scalar> plug_in_estimate(const AsymptoticPieces<Scalar>& pieces)
{
    return as_estimate<Scalar>(pieces.sigma_hat, CovarianceMethod::PlugIn);
}

/**
 * Nonparametric bootstrap: resample (y, delta, x) rows with replacement,
 * re-estimate the censoring curve, weights and expectile fit per replicate.
 * Replicate b draws from make_stream(seed, b), so the result does not depend
 * on the number of worker threads.
 */
template <class Scalar>
CovarianceEstimate<Scalar> bootstrap_covariance(const SurvivalSample<Scalar>& sample,
                                                const ExpectileIndex<Scalar>& tau, int replicates,
                                                std::uint64_t seed,
                                                const SolverConfig<Scalar>& config = {},
                                                const WeightOptions<Scalar>& options = {},
                                                unsigned threads = 1)
{
    if (replicates < 2) throw Error(ErrorKind::Usage, "bootstrap needs at least 2 replicates");
    const Index n = sample.n();
    const Index p = sample.p();
    if (n <= p) {
        throw Error(ErrorKind::Data, "bootstrap needs more observations (" + std::to_string(n) +
                                         ") than coefficients (" + std::to_string(p) + ")");
    }
    const auto full = fit_censored_expectile(sample, tau, censoring_weights(sample, options), config);

    std::vector<std::optional<Vec<Scalar>>> draws(static_cast<std::size_t>(replicates));
    parallel_for(draws.size(), threads, [&](std::size_t b) {
        auto gen = make_stream(seed, b);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        IndexSet idx(static_cast<std::size_t>(n));
        for (auto& i : idx) i = pick(gen);
        try {
            const auto boot = sample.rows(idx);
            const auto fit = fit_censored_expectile(boot, tau, censoring_weights(boot, options), config,
                                                    std::optional<Vec<Scalar>>(full.beta));
            if (fit.beta.allFinite()) draws[b] = fit.beta;
        } catch (const Error&) {
            // counted as dropped below
        }
    });

    std::vector<Vec<Scalar>> kept;
    for (auto& d : draws) {
        if (d) kept.push_back(std::move(*d));
    }
    const int dropped = replicates - static_cast<int>(kept.size());
    if (dropped * 10 > replicates || kept.size() < 2) {
        throw Error(ErrorKind::Numerical, std::to_string(dropped) + " of " +
                                              std::to_string(replicates) +
                                              " bootstrap replicates failed to fit");
    }
    Vec<Scalar> mean = Vec<Scalar>::Zero(p);
    for (const auto& b : kept) mean += b;
    mean /= Scalar(kept.size());
    Mat<Scalar> cov = Mat<Scalar>::Zero(p, p);
    for (const auto& b : kept) cov.noalias() += (b - mean) * (b - mean).transpose();
    cov /= Scalar(kept.size() - 1);

    auto est = as_estimate<Scalar>(detail::symmetrized<Scalar>(cov), CovarianceMethod::Bootstrap);
    est.replications = static_cast<int>(kept.size());
    est.dropped = dropped;
    est.seed = seed;
    return est;
}

/// beta_j -/+ z_{(1+level)/2} se_j.
template <class Scalar>
std::vector<std::pair<Scalar, Scalar>> confidence_intervals(const Vec<Scalar>& beta,
                                                            const CovarianceEstimate<Scalar>& cov,
                                                            Scalar level)
{
    if (!(level > 0 && level < 1)) throw Error(ErrorKind::Usage, "confidence level must lie in (0, 1)");
    detail::check_length("standard errors", cov.se.size(), beta.size());
    const auto z = static_cast<Scalar>(normal_quantile((1.0 + double(level)) / 2.0));
    std::vector<std::pair<Scalar, Scalar>> out;
    out.reserve(static_cast<std::size_t>(beta.size()));
    for (Index j = 0; j < beta.size(); ++j) {
        out.emplace_back(beta[j] - z * cov.se[j], beta[j] + z * cov.se[j]);
    }
    return out;
}

/**
 * Asymptotic bias of the selected block of an adaptive-LASSO fit,
 *   -(lambda / sqrt(n)) S3_A^-1 (omega_A o sgn(beta_A)),
 * with S3 the IPCW curvature average (which estimates E[h] E[x x']).
 */
template <class Scalar>
Vec<Scalar> oracle_bias_term(const PenalizedFitResult<Scalar>& fit,
                             const SurvivalSample<Scalar>& sample,
                             const ExpectileIndex<Scalar>& tau, const IpcwWeights<Scalar>& weights)
{
    const IndexSet& active = fit.active_set;
    if (active.empty()) throw Error(ErrorKind::Usage, "oracle bias needs a nonempty active set");
    const Index n = sample.n();
    const Vec<Scalar> r = residuals(fit.beta, sample);
    Vec<Scalar> curvature(n);
    for (Index i = 0; i < n; ++i) curvature[i] = weights.w[i] * h(tau, r[i]);
    const Mat<Scalar> s3 =
        detail::sub_block<Scalar>(sample.x().transpose() * curvature.asDiagonal() * sample.x() / Scalar(n), active);
    const Vec<Scalar> omega = detail::effective_weights(sample, fit.penalty);
    Vec<Scalar> drift(static_cast<Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
        const Index j = active[k];
        const Scalar sgn = fit.beta[j] > 0 ? Scalar(1) : Scalar(-1);
        drift[static_cast<Index>(k)] = omega[j] * sgn;
    }
    const Scalar l0 = fit.penalty.lambda / std::sqrt(Scalar(n));
    Eigen::LLT<Mat<Scalar>> llt(s3);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::Numerical, "curvature matrix of the active set is singular");
    }
    return -l0 * llt.solve(drift);
}

} // namespace aftexp
