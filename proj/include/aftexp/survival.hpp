#pragma once

#include <aftexp/error.hpp>
#include <aftexp/sample.hpp>
#include <aftexp/types.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace aftexp {

/// Which indicator drives the product-limit factors.
enum class KmConvention
{
    CensoringSurvival,  // exponent 1 - delta: survival of the censoring time
    PaperLiteral        // exponent delta
};

enum class Side
{
    Right,
    LeftLimit
};

/**
 * Right-continuous step function G(t) = values[k] on [jump_times[k], jump_times[k+1]),
 * equal to 1 before the first jump. An optional horizon freezes the curve at
 * its value at the horizon.
 */
template <class Scalar = double>
class KaplanMeierCurve
{
public:
    KaplanMeierCurve() = default;

    KaplanMeierCurve(std::vector<Scalar> jump_times, std::vector<Scalar> values,
                     KmConvention convention, std::optional<Scalar> horizon = std::nullopt)
        : jump_times_(std::move(jump_times)),
          values_(std::move(values)),
          convention_(convention),
          horizon_(horizon)
    {
        detail::check_length("survival values", static_cast<long long>(values_.size()),
                             static_cast<long long>(jump_times_.size()));
    }

    const std::vector<Scalar>& jump_times() const noexcept { return jump_times_; }
    const std::vector<Scalar>& values() const noexcept { return values_; }
    KmConvention convention() const noexcept { return convention_; }
    const std::optional<Scalar>& horizon() const noexcept { return horizon_; }

    Scalar evaluate(Scalar t, Side side = Side::Right) const
    {
        if (horizon_ && t > *horizon_) {
            // beyond the horizon the curve is frozen at G(B)
            t = *horizon_;
            side = Side::Right;
        }
        auto it = side == Side::Right
                      ? std::upper_bound(jump_times_.begin(), jump_times_.end(), t)
                      : std::lower_bound(jump_times_.begin(), jump_times_.end(), t);
        if (it == jump_times_.begin()) return Scalar(1);
        return values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
    }

    /// Value just before the k-th jump.
    Scalar value_before(std::size_t k) const noexcept
    {
        return k == 0 ? Scalar(1) : values_[k - 1];
    }

private:
    std::vector<Scalar> jump_times_;
    std::vector<Scalar> values_;
    KmConvention convention_ = KmConvention::CensoringSurvival;
    std::optional<Scalar> horizon_;
};

namespace detail {

/// Rank order: time ascending, events before censorings on ties, then input index.
template <class Scalar>
std::vector<Index> km_order(const Vec<Scalar>& y, const Eigen::VectorXi& delta)
{
    std::vector<Index> order(static_cast<std::size_t>(y.size()));
    std::iota(order.begin(), order.end(), Index(0));
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (y[a] != y[b]) return y[a] < y[b];
        if (delta[a] != delta[b]) return delta[a] > delta[b];
        return a < b;
    });
    return order;
}

} // namespace detail

/**
 * Product-limit estimate G(t) = prod_{i: Y_i <= t} ((n - R_i) / (n - R_i + 1))^{e_i},
 * with e_i = 1 - delta_i (CensoringSurvival) or delta_i (PaperLiteral).
 */
template <class Scalar>
KaplanMeierCurve<Scalar> fit_km(const SurvivalSample<Scalar>& sample,
                                KmConvention convention = KmConvention::CensoringSurvival,
                                std::optional<Scalar> max_followup = std::nullopt)
{
    const Index n = sample.n();
    if (n == 0) throw Error(ErrorKind::Data, "cannot fit Kaplan-Meier curve on an empty sample");
    if (max_followup && !(*max_followup > 0)) {
        throw Error(ErrorKind::Usage, "maximum follow-up must be positive");
    }
    const auto& y = sample.y();
    const auto& delta = sample.delta();
    const auto order = detail::km_order(y, delta);

    std::vector<Scalar> times;
    std::vector<Scalar> values;
    Scalar current = 1;
    for (std::size_t k = 0; k < order.size();) {
        const Scalar t = y[order[k]];
        if (max_followup && t > *max_followup) break;
        bool jumped = false;
        for (; k < order.size() && y[order[k]] == t; ++k) {
            const int d = delta[order[k]];
            const int exponent = convention == KmConvention::CensoringSurvival ? 1 - d : d;
            if (exponent == 0) continue;
            const auto rank = static_cast<Scalar>(k + 1);
            current *= (Scalar(n) - rank) / (Scalar(n) - rank + Scalar(1));
            jumped = true;
        }
        if (jumped) {
            times.push_back(t);
            values.push_back(current);
        }
    }
    return KaplanMeierCurve<Scalar>(std::move(times), std::move(values), convention, max_followup);
}

template <class Scalar>
Scalar evaluate(const KaplanMeierCurve<Scalar>& curve, Scalar t, Side side = Side::Right)
{
    return curve.evaluate(t, side);
}

/// Lambda(t) = -log G(t).
template <class Scalar>
Scalar cumulative_hazard(const KaplanMeierCurve<Scalar>& curve, Scalar t)
{
    const Scalar value = curve.evaluate(t, Side::Right);
    if (!(value > Scalar(0))) {
        throw Error(ErrorKind::Numerical,
                    "cumulative hazard diverges: survival estimate is 0 at t = " +
                        std::to_string(double(t)));
    }
    return std::max(Scalar(0), -std::log(value));
}

template <class Scalar = double>
struct IpcwWeights
{
    Vec<Scalar> w;
    Scalar floor = Scalar(0.01);
    std::optional<Scalar> max_followup;
};

/// w_i = delta_i / max(G(Y_i), floor).
template <class Scalar>
IpcwWeights<Scalar> ipcw_weights(const SurvivalSample<Scalar>& sample,
                                 const KaplanMeierCurve<Scalar>& curve,
                                 Scalar floor = Scalar(0.01), Side side = Side::LeftLimit)
{
    if (!(floor > Scalar(0) && floor < Scalar(1))) {
        throw Error(ErrorKind::Usage, "weight floor must lie in (0, 1)");
    }
    IpcwWeights<Scalar> out;
    out.floor = floor;
    out.max_followup = curve.horizon();
    out.w.resize(sample.n());
    for (Index i = 0; i < sample.n(); ++i) {
        out.w[i] = sample.delta()[i] == 0
                       ? Scalar(0)
                       : Scalar(1) / std::max(curve.evaluate(sample.y()[i], side), floor);
    }
    return out;
}

/// Options bundling the censoring-weight pipeline.
template <class Scalar = double>
struct WeightOptions
{
    KmConvention convention = KmConvention::CensoringSurvival;
    Scalar floor = Scalar(0.01);
    Side side = Side::LeftLimit;
    std::optional<Scalar> max_followup;
};

template <class Scalar>
IpcwWeights<Scalar> censoring_weights(const SurvivalSample<Scalar>& sample,
                                      const WeightOptions<Scalar>& options = {})
{
    const auto curve = fit_km(sample, options.convention, options.max_followup);
    return ipcw_weights(sample, curve, options.floor, options.side);
}

} // namespace aftexp
