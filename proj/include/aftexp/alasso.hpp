#pragma once

#include <aftexp/error.hpp>
#include <aftexp/loss.hpp>
#include <aftexp/sample.hpp>
#include <aftexp/solver.hpp>
#include <aftexp/survival.hpp>
#include <aftexp/types.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace aftexp {

template <class Scalar = double>
struct PenaltySpec
{
    Scalar lambda = 0;
    Scalar gamma = 2;
    Vec<Scalar> adaptive_weights;  // +inf freezes a coefficient at 0
    bool penalize_intercept = false;
};

template <class Scalar = double>
struct PenalizedFitResult
{
    Vec<Scalar> beta;
    IndexSet active_set;
    PenaltySpec<Scalar> penalty;
    Scalar objective = 0;  // penalized
    Scalar kkt_max_violation = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<Scalar> objective_trace;
};

/// omega_j = |pilot_j|^-gamma, or +inf when |pilot_j| <= zero_tol.
template <class Scalar>
Vec<Scalar> adaptive_weights(const Vec<Scalar>& pilot, Scalar gamma, Scalar zero_tol = Scalar(1e-12))
{
    if (!(gamma > 0)) throw Error(ErrorKind::Usage, "gamma must be positive");
    if (!(zero_tol >= 0)) throw Error(ErrorKind::Usage, "zero tolerance must be nonnegative");
    Vec<Scalar> omega(pilot.size());
    for (Index j = 0; j < pilot.size(); ++j) {
        const Scalar a = std::abs(pilot[j]);
        omega[j] = a > zero_tol ? std::pow(a, -gamma) : std::numeric_limits<Scalar>::infinity();
    }
    return omega;
}

/// lambda_n = n^0.4.
template <class Scalar = double>
Scalar default_lambda(Index n)
{
    if (n < 1) throw Error(ErrorKind::Usage, "sample size must be at least 1");
    return std::pow(Scalar(n), Scalar(0.4));
}

namespace detail {

/// Per-coordinate penalty multiplier actually applied: 0 for an unpenalized intercept.
template <class Scalar>
Vec<Scalar> effective_weights(const SurvivalSample<Scalar>& sample, const PenaltySpec<Scalar>& penalty)
{
    check_length("adaptive weights", penalty.adaptive_weights.size(), sample.p());
    Vec<Scalar> omega = penalty.adaptive_weights;
    if (sample.has_intercept() && !penalty.penalize_intercept) omega[0] = 0;
    for (Index j = 0; j < omega.size(); ++j) {
        if (!(omega[j] >= 0)) throw Error(ErrorKind::Usage, "adaptive weights must be nonnegative");
    }
    return omega;
}

template <class Scalar>
Scalar penalty_value(const Vec<Scalar>& beta, const Vec<Scalar>& omega, Scalar lambda)
{
    Scalar total = 0;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta[j] != Scalar(0)) total += omega[j] * std::abs(beta[j]);
    }
    return lambda * total;
}

template <class Scalar>
Scalar soft_threshold(Scalar u, Scalar t) noexcept
{
    if (u > t) return u - t;
    if (u < -t) return u + t;
    return Scalar(0);
}

/// Largest subgradient-condition violation given the loss gradient.
template <class Scalar>
Scalar kkt_violation(const Vec<Scalar>& beta, const Vec<Scalar>& grad, const Vec<Scalar>& omega,
                     Scalar lambda)
{
    Scalar worst = 0;
    for (Index j = 0; j < beta.size(); ++j) {
        if (std::isinf(omega[j])) continue;  // constrained to 0
        const Scalar bound = lambda * omega[j];
        const Scalar v = beta[j] == Scalar(0) ? std::max(Scalar(0), std::abs(grad[j]) - bound)
                                              : std::abs(grad[j] + bound * (beta[j] > 0 ? 1 : -1));
        worst = std::max(worst, v);
    }
    return worst;
}

template <class Scalar>
IndexSet nonzero_pattern(const Vec<Scalar>& beta)
{
    IndexSet idx;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta[j] != Scalar(0)) idx.push_back(j);
    }
    return idx;
}

} // namespace detail

/// Subgradient-condition certificate recomputed from scratch.
template <class Scalar>
Scalar kkt_report(const PenalizedFitResult<Scalar>& fit, const SurvivalSample<Scalar>& sample,
                  const ExpectileIndex<Scalar>& tau, const IpcwWeights<Scalar>& weights)
{
    detail::check_length("penalized beta", fit.beta.size(), sample.p());
    const Vec<Scalar> omega = detail::effective_weights(sample, fit.penalty);
    const Vec<Scalar> grad = gradient(fit.beta, sample, weights.w, tau);
    return detail::kkt_violation(fit.beta, grad, omega, fit.penalty.lambda);
}

/**
 * Adaptive-LASSO expectile estimate: minimizes
 *   sum_i w_i rho_tau(log y_i - x_i' beta) + lambda sum_j omega_j |beta_j|.
 * Outer loop: the loss is replaced by its exact quadratic on the current
 * residual-sign pattern (curvature w_i h_tau(r_i) / 2). Inner loop: cyclic
 * coordinate descent with soft-thresholding on that quadratic. Outer steps
 * are halved whenever they would raise the penalized objective.
 */
template <class Scalar>
PenalizedFitResult<Scalar> fit_censored_alasso(const SurvivalSample<Scalar>& sample,
                                               const ExpectileIndex<Scalar>& tau,
                                               const IpcwWeights<Scalar>& weights,
                                               const PenaltySpec<Scalar>& penalty,
                                               const SolverConfig<Scalar>& config = {},
                                               const std::optional<Vec<Scalar>>& init = std::nullopt)
{
    config.validate();
    if (!(penalty.lambda >= 0)) throw Error(ErrorKind::Usage, "lambda must be nonnegative");
    detail::check_length("weights", weights.w.size(), sample.n());
    const Vec<Scalar> omega = detail::effective_weights(sample, penalty);
    const Index p = sample.p();
    const Scalar lambda = penalty.lambda;
    const detail::WeightedLeastSquares<Scalar> wls(sample, weights.w, config.ridge);

    auto penalized = [&](const Vec<Scalar>& b) {
        return wls.objective(b, tau) + detail::penalty_value(b, omega, lambda);
    };

    Vec<Scalar> beta = init ? *init : Vec<Scalar>(Vec<Scalar>::Zero(p));
    detail::check_length("initial beta", beta.size(), p);
    for (Index j = 0; j < p; ++j) {
        if (std::isinf(omega[j])) beta[j] = 0;
    }

    PenalizedFitResult<Scalar> fit;
    fit.penalty = penalty;
    Scalar obj = penalized(beta);
    fit.objective_trace.push_back(obj);

    Mat<Scalar> gram;
    Vec<Scalar> rhs;
    constexpr Scalar move_tol = Scalar(1e-10);
    constexpr int max_cycles = 100000;

    auto certified = [&](const Vec<Scalar>& b) {
        const Vec<Scalar> grad = gradient(b, sample, weights.w, tau);
        return detail::kkt_violation(b, grad, omega, lambda);
    };

    for (int it = 1; it <= config.max_iter; ++it) {
        wls.normal_equations(wls.asymmetry(beta, tau), gram, rhs);
        gram.diagonal().array() += config.ridge;

        // coordinate descent on b' G b - 2 c' b + lambda sum omega_j |b_j|
        Vec<Scalar> target = beta;
        Vec<Scalar> gb = gram * target;
        for (int cycle = 0; cycle < max_cycles; ++cycle) {
            Scalar max_move = 0;
            for (Index j = 0; j < p; ++j) {
                if (std::isinf(omega[j])) continue;
                const Scalar gjj = gram(j, j);
                Scalar next;
                if (gjj > 0) {
                    const Scalar u = rhs[j] - gb[j] + gjj * target[j];
                    next = detail::soft_threshold(u, lambda * omega[j] / Scalar(2)) / gjj;
                } else if (lambda * omega[j] > 0) {
                    next = 0;
                } else {
                    throw Error(ErrorKind::Numerical,
                                "unpenalized coefficient " + std::to_string(j) +
                                    " has no weighted variation");
                }
                const Scalar delta = next - target[j];
                if (delta != Scalar(0)) {
                    gb += gram.col(j) * delta;
                    target[j] = next;
                    max_move = std::max(max_move, std::abs(delta));
                }
            }
            if (max_move < move_tol) break;
        }

        Vec<Scalar> candidate = target;
        Scalar cand_obj = penalized(candidate);
        Scalar step = 1;
        for (int halving = 0; cand_obj > obj && halving < 60; ++halving) {
            step *= Scalar(0.5);
            candidate = beta + step * (target - beta);
            cand_obj = penalized(candidate);
        }
        if (cand_obj > obj) break;

        const Scalar decrease = (obj - cand_obj) / std::max(obj, std::numeric_limits<Scalar>::min());
        beta = std::move(candidate);
        obj = cand_obj;
        fit.iterations = it;
        fit.objective_trace.push_back(obj);
        if (decrease < config.tol && certified(beta) <= Scalar(1e-6) * (Scalar(1) + lambda)) break;
        if (decrease == Scalar(0)) break;
    }

    fit.beta = beta;
    fit.active_set = detail::nonzero_pattern(beta);
    fit.objective = obj;
    fit.kkt_max_violation = certified(beta);
    fit.converged = fit.kkt_max_violation <= Scalar(1e-6) * (Scalar(1) + lambda);
    return fit;
}

template <class Scalar = double>
struct TwoStageResult
{
    FitResult<Scalar> pilot;
    PenalizedFitResult<Scalar> penalized;
    std::optional<FitResult<Scalar>> refit;  // fit on the selected columns only
    Vec<Scalar> refit_beta;                  // refit expanded to p coordinates (zeros elsewhere)
    IndexSet selected;                       // selected covariates, intercept excluded
    bool refit_skipped = false;
};

/**
 * Pilot expectile fit, adaptive weights from it, penalized fit, then an
 * unpenalized refit on the selected columns. The refit is skipped when no
 * covariate besides an unpenalized intercept is selected.
 */
template <class Scalar>
TwoStageResult<Scalar> two_stage_fit(const SurvivalSample<Scalar>& sample,
                                     const ExpectileIndex<Scalar>& tau,
                                     const IpcwWeights<Scalar>& weights, Scalar gamma, Scalar lambda,
                                     const SolverConfig<Scalar>& config = {},
                                     bool penalize_intercept = false,
                                     Scalar zero_tol = Scalar(1e-12))
{
    TwoStageResult<Scalar> out;
    out.pilot = fit_censored_expectile(sample, tau, weights, config);

    PenaltySpec<Scalar> penalty;
    penalty.lambda = lambda;
    penalty.gamma = gamma;
    penalty.adaptive_weights = adaptive_weights(out.pilot.beta, gamma, zero_tol);
    penalty.penalize_intercept = penalize_intercept;
    out.penalized = fit_censored_alasso(sample, tau, weights, penalty, config,
                                        std::optional<Vec<Scalar>>(out.pilot.beta));

    const Index first = sample.has_intercept() ? 1 : 0;
    for (Index j : out.penalized.active_set) {
        if (j >= first) out.selected.push_back(j);
    }
    out.refit_beta = Vec<Scalar>::Zero(sample.p());
    if (out.selected.empty()) {
        out.refit_skipped = true;
        return out;
    }
    IndexSet cols;
    if (sample.has_intercept()) cols.push_back(0);
    cols.insert(cols.end(), out.selected.begin(), out.selected.end());
    const auto reduced = sample.columns(cols);
    Vec<Scalar> init(static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) init[k] = out.penalized.beta[cols[k]];
    out.refit = fit_censored_expectile(reduced, tau, weights, config, std::optional<Vec<Scalar>>(init));
    for (std::size_t k = 0; k < cols.size(); ++k) out.refit_beta[cols[k]] = out.refit->beta[k];
    return out;
}

} // namespace aftexp
