#pragma once

#include <aftexp/error.hpp>
#include <aftexp/types.hpp>

#include <cmath>
#include <string>
#include <utility>

namespace aftexp {

/**
 * Observed right-censored dataset: follow-up times y = min(T, C), event
 * indicators delta = 1{T <= C} and an n x p covariate matrix. When
 * `intercept` is set, column 0 of x is the all-ones column.
 */
template <class Scalar = double>
class SurvivalSample
{
public:
    using vec_t = Vec<Scalar>;
    using mat_t = Mat<Scalar>;

    SurvivalSample() = default;

    SurvivalSample(vec_t y, Eigen::VectorXi delta, mat_t x, bool intercept = false)
        : y_(std::move(y)), delta_(std::move(delta)), x_(std::move(x)), intercept_(intercept)
    {
        if (y_.size() == 0) {
            throw Error(ErrorKind::Data, "survival sample is empty");
        }
        detail::check_length("delta", delta_.size(), y_.size());
        detail::check_length("covariate rows", x_.rows(), y_.size());
        if (x_.cols() < 1) {
            throw Error(ErrorKind::Data, "survival sample needs at least one covariate column");
        }
        log_y_.resize(y_.size());
        for (Index i = 0; i < y_.size(); ++i) {
            if (!(y_[i] > 0) || !std::isfinite(y_[i])) {
                throw Error(ErrorKind::Data, "follow-up time at row " + std::to_string(i) +
                                                 " must be finite and strictly positive");
            }
            if (delta_[i] != 0 && delta_[i] != 1) {
                throw Error(ErrorKind::Data,
                            "event indicator at row " + std::to_string(i) + " must be 0 or 1");
            }
            log_y_[i] = std::log(y_[i]);
        }
        if (intercept_ && !(x_.col(0).array() == Scalar(1)).all()) {
            throw Error(ErrorKind::Data, "intercept declared but column 0 is not all ones");
        }
    }

    Index n() const noexcept { return y_.size(); }
    Index p() const noexcept { return x_.cols(); }

    const vec_t& y() const noexcept { return y_; }
    const vec_t& log_y() const noexcept { return log_y_; }
    const Eigen::VectorXi& delta() const noexcept { return delta_; }
    const mat_t& x() const noexcept { return x_; }
    bool has_intercept() const noexcept { return intercept_; }

    Index events() const noexcept { return delta_.sum(); }

    /// Copy with an all-ones column prepended.
    SurvivalSample with_intercept() const
    {
        if (intercept_) return *this;
        mat_t x1(n(), p() + 1);
        x1.col(0).setOnes();
        x1.rightCols(p()) = x_;
        return SurvivalSample(y_, delta_, std::move(x1), true);
    }

    /// Rows in the given order (repeats allowed, as in a bootstrap draw).
    SurvivalSample rows(const IndexSet& idx) const
    {
        const auto m = static_cast<Index>(idx.size());
        vec_t y(m);
        Eigen::VectorXi d(m);
        mat_t x(m, p());
        for (Index k = 0; k < m; ++k) {
            y[k] = y_[idx[k]];
            d[k] = delta_[idx[k]];
            x.row(k) = x_.row(idx[k]);
        }
        return SurvivalSample(std::move(y), std::move(d), std::move(x), intercept_);
    }

    /// Sub-design restricted to the given columns; keeps the intercept flag
    /// only when column 0 is retained first.
    SurvivalSample columns(const IndexSet& cols) const
    {
        mat_t x(n(), static_cast<Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) x.col(k) = x_.col(cols[k]);
        const bool icpt = intercept_ && !cols.empty() && cols.front() == 0;
        return SurvivalSample(y_, delta_, std::move(x), icpt);
    }

    /// Same times and covariates, replaced log-time response. Used by
    /// equivariance checks and by data generators working on the log scale.
    SurvivalSample with_log_y(const vec_t& log_y) const
    {
        detail::check_length("log_y", log_y.size(), n());
        return SurvivalSample(log_y.array().exp().matrix(), delta_, x_, intercept_);
    }

private:
    vec_t y_;
    vec_t log_y_;
    Eigen::VectorXi delta_;
    mat_t x_;
    bool intercept_ = false;
};

} // namespace aftexp
