#pragma once

#include <aftexp/inference.hpp>
#include <aftexp/io.hpp>
#include <aftexp/simulation.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aftexp {

inline constexpr int kReportSchemaVersion = 1;

enum class SeMethod
{
    PlugIn,
    Bootstrap
};

struct FitOptions
{
    double tau = 0.5;
    std::optional<double> lambda;  // default n^0.4
    double gamma = 2.0;
    bool penalize = true;
    bool intercept = true;
    SeMethod se = SeMethod::PlugIn;
    int boot_reps = 200;
    std::uint64_t seed = 1;
    KmConvention convention = KmConvention::CensoringSurvival;
    double g_floor = 0.01;
    double level = 0.95;
    unsigned threads = 1;
};

struct CoefficientRow
{
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct FitReport
{
    std::vector<std::string> selected_variables;
    std::vector<CoefficientRow> coefficients;  // refit on the selection (intercept first when fitted)
    std::vector<double> pilot;                 // unpenalized fit on all covariates
    double tau = 0.5;
    std::optional<double> lambda;
    double gamma = 2.0;
    bool penalized = false;
    bool refit_skipped = false;
    bool converged = false;
    std::string se_method;
    Index n_used = 0;
    Index n_dropped = 0;
    double censoring_fraction = 0.0;
};

/// Censoring weights, pilot fit, optional adaptive-LASSO selection and refit, then inference.
FitReport run_fit(const Dataset& data, const FitOptions& options);

nlohmann::json to_json(const FitReport& report);
nlohmann::json to_json(const StudyReport& report);

/// Human-readable coefficient table.
std::string format_table(const FitReport& report);

/// One row per (method, metric): method,n,p,rate,lambda_rule,metric,value,reps,seed.
std::string study_csv(const StudyReport& report, const StudyConfig& config);

/// Envelope {schema_version, command, flags, results}.
nlohmann::json make_envelope(const std::string& command, nlohmann::json flags, nlohmann::json results);

} // namespace aftexp
