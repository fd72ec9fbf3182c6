#pragma once

#include <aftexp/error.hpp>
#include <aftexp/sample.hpp>
#include <aftexp/types.hpp>

#include <string>

namespace aftexp {

/// Expectile index tau, restricted to the open interval (0, 1).
template <class Scalar = double>
class ExpectileIndex
{
public:
    ExpectileIndex() = default;

    explicit ExpectileIndex(Scalar tau) : tau_(tau)
    {
        if (!(tau > Scalar(0) && tau < Scalar(1))) {
            throw Error(ErrorKind::Usage,
                        "expectile index must lie in (0, 1), got " + std::to_string(double(tau)));
        }
    }

    Scalar value() const noexcept { return tau_; }
    operator Scalar() const noexcept { return tau_; }

    /// Weight of the squared residual: tau on x >= 0, 1 - tau on x < 0.
    Scalar asymmetry(Scalar x) const noexcept
    {
        return x >= Scalar(0) ? tau_ : Scalar(1) - tau_;
    }

private:
    Scalar tau_ = Scalar(0.5);
};

template <class Scalar>
ExpectileIndex(Scalar) -> ExpectileIndex<Scalar>;

/// rho_tau(x) = |tau - 1{x < 0}| x^2.
template <class Scalar>
Scalar rho(const ExpectileIndex<Scalar>& tau, Scalar x) noexcept
{
    return tau.asymmetry(x) * x * x;
}

/// Derivative of rho_tau(x - t) in t at t = 0, i.e. minus rho_tau'(x).
template <class Scalar>
Scalar g(const ExpectileIndex<Scalar>& tau, Scalar x) noexcept
{
    return Scalar(-2) * tau.asymmetry(x) * x;
}

/// Second derivative of rho_tau; right-continuous at 0.
template <class Scalar>
Scalar h(const ExpectileIndex<Scalar>& tau, Scalar x) noexcept
{
    return Scalar(2) * tau.asymmetry(x);
}

template <class Scalar = double>
struct WeightedObjectiveState
{
    Vec<Scalar> residuals;
    Vec<Scalar> case_weights;
    Scalar objective = Scalar(0);
};

namespace detail {

template <class Scalar>
void check_beta_weights(const Vec<Scalar>& beta, const SurvivalSample<Scalar>& sample,
                        const Vec<Scalar>& weights)
{
    check_length("beta", beta.size(), sample.p());
    check_length("weights", weights.size(), sample.n());
}

template <class Scalar>
Scalar weighted_rho_sum(const ExpectileIndex<Scalar>& tau, const Vec<Scalar>& weights,
                        const Vec<Scalar>& residuals)
{
    Scalar total = 0;
    for (Index i = 0; i < residuals.size(); ++i) {
        if (weights[i] != Scalar(0)) total += weights[i] * rho(tau, residuals[i]);
    }
    return total;
}

} // namespace detail

/// Residuals log y - X beta.
template <class Scalar>
Vec<Scalar> residuals(const Vec<Scalar>& beta, const SurvivalSample<Scalar>& sample)
{
    detail::check_length("beta", beta.size(), sample.p());
    return sample.log_y() - sample.x() * beta;
}

/// Weighted expectile objective sum_i w_i rho_tau(log y_i - x_i' beta).
template <class Scalar>
WeightedObjectiveState<Scalar> objective(const Vec<Scalar>& beta,
                                         const SurvivalSample<Scalar>& sample,
                                         const Vec<Scalar>& weights,
                                         const ExpectileIndex<Scalar>& tau)
{
    detail::check_beta_weights(beta, sample, weights);
    WeightedObjectiveState<Scalar> state;
    state.residuals = sample.log_y() - sample.x() * beta;
    state.case_weights = weights;
    state.objective = detail::weighted_rho_sum(tau, weights, state.residuals);
    return state;
}

/**
 * Gradient of the objective with respect to beta. Since d/dbeta of
 * rho_tau(log y - x' beta) is -rho_tau'(r) x and g = -rho_tau', this is
 * sum_i w_i g_tau(r_i) x_i.
 */
template <class Scalar>
Vec<Scalar> gradient(const Vec<Scalar>& beta, const SurvivalSample<Scalar>& sample,
                     const Vec<Scalar>& weights, const ExpectileIndex<Scalar>& tau)
{
    detail::check_beta_weights(beta, sample, weights);
    const Vec<Scalar> r = sample.log_y() - sample.x() * beta;
    Vec<Scalar> score(r.size());
    for (Index i = 0; i < r.size(); ++i) score[i] = weights[i] * g(tau, r[i]);
    return sample.x().transpose() * score;
}

} // namespace aftexp
