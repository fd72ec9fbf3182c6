#pragma once

#include <aftexp/alasso.hpp>
#include <aftexp/random.hpp>
#include <aftexp/sample.hpp>
#include <aftexp/solver.hpp>
#include <aftexp/survival.hpp>
#include <aftexp/types.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aftexp {

enum class ErrorDist
{
    Gumbel,          // standard Gumbel G(0, 1), mean = Euler's constant
    ShiftedUniform,  // U[-1, 2] - 1/6
    Zero             // point mass at 0 (degenerate, for calibration checks)
};

struct NormalLaw
{
    double mean = 1.0;
    double sd = 1.0;
};

/// True AFT model log T = intercept + x' coefficients + eps.
struct TrueModel
{
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    IndexSet active_set;  // {j : coefficients[j] != 0}, 0-based
    Index q = 0;

    TrueModel() = default;
    explicit TrueModel(Eigen::VectorXd coefficients, double intercept = 0.0);

    Index p() const noexcept { return coefficients.size(); }
};

/// 0.9, -2, 0.5, 1, -1 followed by p - 5 zeros.
TrueModel sparse_design_model(Index p, double intercept = 0.0);

/// Two covariates with coefficients 5 log n and log n.
TrueModel growing_design_model(Index n);

struct DataGenConfig
{
    Index n = 100;
    ErrorDist error = ErrorDist::Gumbel;
    std::vector<NormalLaw> covariates;  // one per column; empty means N(1, 1) everywhere
    double c1 = 1.0;                    // C ~ U[0, c1]
    std::uint64_t seed = 0;
    std::uint64_t replication = 0;

    NormalLaw covariate_law(Index j) const;
};

/// Covariate laws of the two-covariate design: N(1, 1) and N(1, 5) (variance 5).
std::vector<NormalLaw> growing_design_covariates();

struct GeneratedData
{
    SurvivalSample<double> sample;
    Eigen::VectorXd log_t;      // latent T* = log T
    Eigen::VectorXd censoring;  // latent C
    Eigen::VectorXd errors;     // latent eps
    double censoring_fraction = 0.0;
};

double sample_error(ErrorDist dist, Rng& gen);

/// Draws (Y, delta, X) with T* = intercept + X beta + eps, Y = min(exp(T*), C).
GeneratedData generate_dataset(const DataGenConfig& config, const TrueModel& model);

/// Bisection on c1 so that the Monte Carlo censoring rate P[T > C] hits the target.
double calibrate_c1(const TrueModel& model, const DataGenConfig& config, double target_rate,
                    double tol = 0.005, Index draws = 100000, std::uint64_t seed = 0);

/// tau solving E[g_tau(eps)] = 0, i.e. B / (A + B) with A = E[eps 1{eps >= 0}], B = -E[eps 1{eps < 0}].
double centering_tau(ErrorDist dist);

enum class Method
{
    Expectile,
    LeastSquares
};

enum class InterceptMode
{
    WithIntercept,
    WithoutIntercept
};

struct LambdaRule
{
    enum class Kind
    {
        SqrtN,
        Pow04,
        Fixed
    };
    Kind kind = Kind::Pow04;
    double value = 0.0;

    double operator()(Index n) const;
    std::string label() const;
    static LambdaRule parse(const std::string& text);
};

struct StudyConfig
{
    TrueModel model;
    DataGenConfig data;                     // data.c1 is used unless censoring_rate is set
    std::optional<double> censoring_rate;   // calibrate c1 once for this target
    std::vector<Method> methods{Method::Expectile};
    std::optional<double> tau;              // defaults to the centering tau of the error law
    bool penalized = true;
    int reps = 100;
    LambdaRule lambda_rule;
    double gamma = 2.0;
    InterceptMode intercept_mode = InterceptMode::WithoutIntercept;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    SolverConfig<double> solver;
    WeightOptions<double> weights;
};

/// Outcome of one replication for one method.
struct ReplicationRecord
{
    bool ok = false;
    std::string failure;
    Eigen::VectorXd estimate;  // covariate coefficients (intercept excluded)
    double intercept = 0.0;    // estimated intercept (0 when not fitted)
    IndexSet selected;         // nonzero covariate coefficients
    double l2_error = 0.0;
    double censoring_fraction = 0.0;
};

struct MethodSummary
{
    Method method = Method::Expectile;
    double tau = 0.5;
    std::optional<double> pct_true_zeros;   // empty when the model has no zero coefficient
    std::optional<double> pct_false_zeros;  // empty when the model has no nonzero coefficient
    double l2_error = 0.0;                  // mean ||estimate - truth||
    double sd_active = 0.0;                 // pooled SD of active-coordinate errors
    double sd_l2 = 0.0;                     // SD of the per-replication L2 errors
    int reps_used = 0;
    int excluded = 0;
    std::vector<ReplicationRecord> replications;
};

struct StudyReport
{
    int reps = 0;
    double c1 = 0.0;
    double mean_censoring_fraction = 0.0;
    std::vector<MethodSummary> methods;
};

std::string to_string(Method m);
std::string to_string(ErrorDist d);
std::string to_string(InterceptMode m);

/// Fits one replication's data by one method, returning the covariate estimate.
ReplicationRecord fit_replication(const GeneratedData& data, const TrueModel& model, Method method,
                                  double tau, const StudyConfig& config);

/// Monte Carlo study: reps independent datasets, each fitted by every method.
StudyReport run_study(const StudyConfig& config);

/// True/false zero percentages of a set of selections (exact averaging formulas).
std::optional<double> percent_true_zeros(const std::vector<IndexSet>& selections, const TrueModel& model);
std::optional<double> percent_false_zeros(const std::vector<IndexSet>& selections, const TrueModel& model);

} // namespace aftexp
