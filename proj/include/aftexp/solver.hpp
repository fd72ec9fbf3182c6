#pragma once

#include <aftexp/error.hpp>
#include <aftexp/loss.hpp>
#include <aftexp/sample.hpp>
#include <aftexp/survival.hpp>
#include <aftexp/types.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace aftexp {

template <class Scalar = double>
struct SolverConfig
{
    Scalar tol = Scalar(1e-10);  // relative objective decrease
    int max_iter = 200;
    Scalar ridge = Scalar(0);

    void validate() const
    {
        if (!(tol > 0)) throw Error(ErrorKind::Usage, "solver tolerance must be positive");
        if (max_iter < 1) throw Error(ErrorKind::Usage, "max_iter must be at least 1");
        if (!(ridge >= 0)) throw Error(ErrorKind::Usage, "ridge must be nonnegative");
    }
};

template <class Scalar = double>
struct FitResult
{
    Vec<Scalar> beta;
    Vec<Scalar> residuals;
    Scalar objective = 0;
    int iterations = 0;
    bool converged = false;
    ExpectileIndex<Scalar> tau;
    std::vector<Scalar> objective_trace;  // objective after init and after every accepted step
};

/// Stationarity threshold shared by the solvers: ||grad||_inf <= 1e-6 (1 + ||beta||).
template <class Scalar>
Scalar stationarity_tolerance(const Vec<Scalar>& beta)
{
    return Scalar(1e-6) * (Scalar(1) + beta.norm());
}

namespace detail {

/**
 * Normal equations of a weighted least-squares problem restricted to the rows
 * with nonzero case weight. Kept as a small workspace so repeated solves
 * reuse the compacted design.
 */
template <class Scalar>
class WeightedLeastSquares
{
public:
    WeightedLeastSquares(const SurvivalSample<Scalar>& sample, const Vec<Scalar>& case_weights,
                         Scalar ridge)
        : ridge_(ridge)
    {
        for (Index i = 0; i < sample.n(); ++i) {
            if (case_weights[i] > 0) rows_.push_back(i);
        }
        const auto m = static_cast<Index>(rows_.size());
        x_.resize(m, sample.p());
        z_.resize(m);
        w_.resize(m);
        for (Index k = 0; k < m; ++k) {
            x_.row(k) = sample.x().row(rows_[k]);
            z_[k] = sample.log_y()[rows_[k]];
            w_[k] = case_weights[rows_[k]];
        }
        if (m < sample.p() && ridge_ == 0) {
            throw Error(ErrorKind::Data,
                        "only " + std::to_string(m) + " positively weighted rows for " +
                            std::to_string(sample.p()) +
                            " coefficients; data too heavily censored (set a ridge to force a fit)");
        }
    }

    const Mat<Scalar>& x() const noexcept { return x_; }
    const Vec<Scalar>& z() const noexcept { return z_; }
    const Vec<Scalar>& w() const noexcept { return w_; }

    /// Gram matrix X' diag(w * a) X and right-hand side X' diag(w * a) z.
    void normal_equations(const Vec<Scalar>& a, Mat<Scalar>& gram, Vec<Scalar>& rhs) const
    {
        const Vec<Scalar> wa = w_.cwiseProduct(a);
        const Mat<Scalar> xs = x_.array().colwise() * wa.array().sqrt();
        gram.setZero(x_.cols(), x_.cols());
        gram.template selfadjointView<Eigen::Lower>().rankUpdate(xs.transpose());
        gram = gram.template selfadjointView<Eigen::Lower>();
        rhs.noalias() = x_.transpose() * wa.cwiseProduct(z_);
    }

    Vec<Scalar> solve(const Vec<Scalar>& a) const
    {
        Mat<Scalar> gram;
        Vec<Scalar> rhs;
        normal_equations(a, gram, rhs);
        gram.diagonal().array() += ridge_;
        Eigen::LLT<Mat<Scalar>> llt(gram);
        const Scalar eps = std::numeric_limits<Scalar>::epsilon();
        if (llt.info() != Eigen::Success || llt.rcond() < Scalar(gram.rows()) * eps * Scalar(10)) {
            throw Error(ErrorKind::Numerical,
                        "weighted design is rank deficient; add covariate variation or a ridge");
        }
        return llt.solve(rhs);
    }

    /// Per-row asymmetry weights tau / (1 - tau) at the given coefficients.
    Vec<Scalar> asymmetry(const Vec<Scalar>& beta, const ExpectileIndex<Scalar>& tau) const
    {
        const Vec<Scalar> r = z_ - x_ * beta;
        Vec<Scalar> a(r.size());
        for (Index k = 0; k < r.size(); ++k) a[k] = tau.asymmetry(r[k]);
        return a;
    }

    Scalar objective(const Vec<Scalar>& beta, const ExpectileIndex<Scalar>& tau) const
    {
        const Vec<Scalar> r = z_ - x_ * beta;
        return weighted_rho_sum(tau, w_, r);
    }

private:
    std::vector<Index> rows_;
    Mat<Scalar> x_;
    Vec<Scalar> z_;
    Vec<Scalar> w_;
    Scalar ridge_;
};

} // namespace detail

/**
 * Censored expectile estimate: minimizes sum_i w_i rho_tau(log y_i - x_i' beta)
 * by iteratively reweighted least squares. Each step solves the weighted
 * least-squares problem with per-row weight w_i * (tau or 1 - tau) chosen by
 * the current residual sign; a step that raises the objective is halved until
 * it does not.
 */
template <class Scalar>
FitResult<Scalar> fit_censored_expectile(const SurvivalSample<Scalar>& sample,
                                         const ExpectileIndex<Scalar>& tau,
                                         const IpcwWeights<Scalar>& weights,
                                         const SolverConfig<Scalar>& config = {},
                                         const std::optional<Vec<Scalar>>& init = std::nullopt)
{
    config.validate();
    detail::check_length("weights", weights.w.size(), sample.n());
    const detail::WeightedLeastSquares<Scalar> wls(sample, weights.w, config.ridge);

    Vec<Scalar> beta;
    if (init) {
        detail::check_length("initial beta", init->size(), sample.p());
        beta = *init;
    } else {
        beta = wls.solve(Vec<Scalar>::Constant(wls.z().size(), Scalar(0.5)));
    }

    FitResult<Scalar> fit;
    fit.tau = tau;
    Scalar obj = wls.objective(beta, tau);
    fit.objective_trace.push_back(obj);

    auto stationary = [&](const Vec<Scalar>& b) {
        return gradient(b, sample, weights.w, tau).template lpNorm<Eigen::Infinity>() <=
               stationarity_tolerance(b);
    };

    bool done = stationary(beta);
    for (int it = 1; it <= config.max_iter && !done; ++it) {
        const Vec<Scalar> target = wls.solve(wls.asymmetry(beta, tau));
        Vec<Scalar> candidate = target;
        Scalar cand_obj = wls.objective(candidate, tau);
        Scalar step = 1;
        for (int halving = 0; cand_obj > obj && halving < 60; ++halving) {
            step *= Scalar(0.5);
            candidate = beta + step * (target - beta);
            cand_obj = wls.objective(candidate, tau);
        }
        if (cand_obj > obj) break;  // no descent left at working precision

        const Scalar decrease = (obj - cand_obj) / std::max(obj, std::numeric_limits<Scalar>::min());
        beta = std::move(candidate);
        obj = cand_obj;
        fit.iterations = it;
        fit.objective_trace.push_back(obj);
        done = stationary(beta) || decrease < config.tol;
    }

    fit.beta = beta;
    fit.residuals = residuals(beta, sample);
    fit.objective = obj;
    fit.converged = stationary(beta);
    return fit;
}

/// Sweep over expectile indices, each fit warm-started from the previous one.
template <class Scalar>
std::vector<FitResult<Scalar>> fit_path_over_tau(const SurvivalSample<Scalar>& sample,
                                                 const std::vector<Scalar>& taus,
                                                 const IpcwWeights<Scalar>& weights,
                                                 const SolverConfig<Scalar>& config = {})
{
    if (taus.empty()) throw Error(ErrorKind::Usage, "expectile index list is empty");
    std::vector<FitResult<Scalar>> path;
    path.reserve(taus.size());
    std::optional<Vec<Scalar>> warm;
    for (Scalar t : taus) {
        path.push_back(fit_censored_expectile(sample, ExpectileIndex<Scalar>(t), weights, config, warm));
        warm = path.back().beta;
    }
    return path;
}

} // namespace aftexp
