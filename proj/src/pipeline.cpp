#include <aftexp/pipeline.hpp>

#include <cmath>
#include <cstdio>
#include <limits>

namespace aftexp {

namespace {

nlohmann::json number_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json optional_number(const std::optional<double>& v)
{
    return v ? number_or_null(*v) : nlohmann::json(nullptr);
}

const char* intercept_name = "(Intercept)";

} // namespace

FitReport run_fit(const Dataset& data, const FitOptions& options)
{
    if (!(options.tau > 0 && options.tau < 1)) throw Error(ErrorKind::Usage, "--tau must lie in (0, 1)");
    if (!(options.gamma > 0)) throw Error(ErrorKind::Usage, "--gamma must be positive");
    if (options.lambda && !(*options.lambda >= 0)) throw Error(ErrorKind::Usage, "--lambda must be nonnegative");
    if (options.se == SeMethod::Bootstrap && options.boot_reps < 2) {
        throw Error(ErrorKind::Usage, "--boot-reps must be at least 2");
    }

    const auto sample = options.intercept ? data.sample.with_intercept() : data.sample;
    const Index first = options.intercept ? 1 : 0;
    auto name_of = [&](Index col) {
        return col < first ? std::string(intercept_name)
                           : data.covariate_names[static_cast<std::size_t>(col - first)];
    };

    WeightOptions<double> wopt;
    wopt.convention = options.convention;
    wopt.floor = options.g_floor;
    const auto curve = fit_km(sample, wopt.convention);
    const auto weights = ipcw_weights(sample, curve, wopt.floor, wopt.side);
    const ExpectileIndex<double> tau(options.tau);
    const SolverConfig<double> solver;

    FitReport report;
    report.tau = options.tau;
    report.gamma = options.gamma;
    report.penalized = options.penalize;
    report.n_used = sample.n();
    report.n_dropped = data.n_dropped;
    report.censoring_fraction = 1.0 - double(sample.events()) / double(sample.n());
    report.se_method = options.se == SeMethod::PlugIn ? "plugin" : "bootstrap";

    IndexSet cols;
    std::optional<FitResult<double>> final_fit;
    if (options.penalize) {
        const double lambda = options.lambda ? *options.lambda : default_lambda<double>(sample.n());
        report.lambda = lambda;
        const auto two = two_stage_fit(sample, tau, weights, options.gamma, lambda, solver);
        report.pilot.assign(two.pilot.beta.data(), two.pilot.beta.data() + two.pilot.beta.size());
        report.refit_skipped = two.refit_skipped;
        if (options.intercept) cols.push_back(0);
        cols.insert(cols.end(), two.selected.begin(), two.selected.end());
        if (two.refit) {
            final_fit = *two.refit;
        } else if (options.intercept) {
            // intercept-only model: refit on the intercept column alone
            final_fit = fit_censored_expectile(sample.columns(cols), tau, weights, solver);
        }
    } else {
        for (Index j = 0; j < sample.p(); ++j) cols.push_back(j);
        final_fit = fit_censored_expectile(sample, tau, weights, solver);
        report.pilot.assign(final_fit->beta.data(), final_fit->beta.data() + final_fit->beta.size());
    }

    if (!final_fit) {
        report.converged = true;
        return report;
    }
    report.converged = final_fit->converged;
    const auto reduced = sample.columns(cols);
    CovarianceEstimate<double> cov;
    if (options.se == SeMethod::PlugIn) {
        cov = plug_in_estimate(plug_in_covariance(reduced, *final_fit, curve, weights));
    } else {
        cov = bootstrap_covariance(reduced, tau, options.boot_reps, options.seed, solver, wopt, options.threads);
    }
    const auto ci = confidence_intervals(final_fit->beta, cov, options.level);
    for (std::size_t k = 0; k < cols.size(); ++k) {
        CoefficientRow row;
        row.name = name_of(cols[k]);
        row.estimate = final_fit->beta[static_cast<Index>(k)];
        row.se = cov.se[static_cast<Index>(k)];
        row.lower = ci[k].first;
        row.upper = ci[k].second;
        if (cols[k] >= first) {
            if (row.estimate == 0.0) continue;  // keep the report consistent with the selection
            report.selected_variables.push_back(row.name);
        }
        report.coefficients.push_back(row);
    }
    return report;
}

nlohmann::json to_json(const FitReport& report)
{
    nlohmann::json coef = nlohmann::json::object();
    nlohmann::json se = nlohmann::json::object();
    nlohmann::json ci = nlohmann::json::object();
    for (const auto& row : report.coefficients) {
        coef[row.name] = number_or_null(row.estimate);
        se[row.name] = number_or_null(row.se);
        ci[row.name] = {number_or_null(row.lower), number_or_null(row.upper)};
    }
    nlohmann::json out;
    out["selected_variables"] = report.selected_variables;
    out["coefficients"] = coef;
    out["standard_errors"] = se;
    out["confidence_intervals"] = ci;
    out["pilot_coefficients"] = nlohmann::json::array();
    for (double b : report.pilot) out["pilot_coefficients"].push_back(number_or_null(b));
    out["tau"] = report.tau;
    out["lambda"] = optional_number(report.lambda);
    out["gamma"] = report.gamma;
    out["penalized"] = report.penalized;
    out["refit_skipped"] = report.refit_skipped;
    out["empty_selection"] = report.selected_variables.empty();
    out["converged"] = report.converged;
    out["se_method"] = report.se_method;
    out["n_used"] = report.n_used;
    out["n_dropped"] = report.n_dropped;
    out["censoring_fraction"] = report.censoring_fraction;
    return out;
}

nlohmann::json to_json(const StudyReport& report)
{
    nlohmann::json out;
    out["reps"] = report.reps;
    out["c1"] = number_or_null(report.c1);
    out["mean_censoring_fraction"] = number_or_null(report.mean_censoring_fraction);
    out["methods"] = nlohmann::json::array();
    for (const auto& m : report.methods) {
        nlohmann::json j;
        j["method"] = to_string(m.method);
        j["tau"] = m.tau;
        j["pct_true_zeros"] = optional_number(m.pct_true_zeros);
        j["pct_false_zeros"] = optional_number(m.pct_false_zeros);
        j["l2_error"] = number_or_null(m.l2_error);
        j["sd_active"] = number_or_null(m.sd_active);
        j["sd_l2"] = number_or_null(m.sd_l2);
        j["reps_used"] = m.reps_used;
        j["excluded"] = m.excluded;
        out["methods"].push_back(std::move(j));
    }
    return out;
}

std::string format_table(const FitReport& report)
{
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "n used %lld, dropped %lld, censored %.1f%%, tau %g",
                  static_cast<long long>(report.n_used), static_cast<long long>(report.n_dropped),
                  100.0 * report.censoring_fraction, report.tau);
    out += line;
    if (report.lambda) {
        std::snprintf(line, sizeof(line), ", lambda %g, gamma %g", *report.lambda, report.gamma);
        out += line;
    }
    out += "\n";
    if (report.selected_variables.empty()) out += "no covariate selected\n";
    std::snprintf(line, sizeof(line), "%-16s %12s %12s %12s %12s\n", "variable", "estimate", "std.err",
                  "lower", "upper");
    out += line;
    for (const auto& row : report.coefficients) {
        std::snprintf(line, sizeof(line), "%-16s %12.5f %12.5f %12.5f %12.5f\n", row.name.c_str(),
                      row.estimate, row.se, row.lower, row.upper);
        out += line;
    }
    return out;
}

std::string study_csv(const StudyReport& report, const StudyConfig& config)
{
    const std::string prefix_rate =
        config.censoring_rate ? format_double(*config.censoring_rate) : std::string("NA");
    const std::string rule = config.penalized ? config.lambda_rule.label() : std::string("none");
    std::string out = "method,n,p,rate,lambda_rule,metric,value,reps,seed\n";
    auto emit = [&](const MethodSummary& m, const char* metric, double value) {
        out += to_string(m.method) + "," + std::to_string(config.data.n) + "," +
               std::to_string(config.model.p()) + "," + prefix_rate + "," + rule + "," + metric + "," +
               format_double(value) + "," + std::to_string(m.reps_used) + "," +
               std::to_string(config.seed) + "\n";
    };
    const double na = std::numeric_limits<double>::quiet_NaN();
    for (const auto& m : report.methods) {
        emit(m, "tau", m.tau);
        emit(m, "pct_true_zeros", m.pct_true_zeros.value_or(na));
        emit(m, "pct_false_zeros", m.pct_false_zeros.value_or(na));
        emit(m, "l2_error", m.l2_error);
        emit(m, "sd_active", m.sd_active);
        emit(m, "sd_l2", m.sd_l2);
        emit(m, "excluded", m.excluded);
        emit(m, "c1", report.c1);
        emit(m, "censoring_fraction", report.mean_censoring_fraction);
    }
    return out;
}

nlohmann::json make_envelope(const std::string& command, nlohmann::json flags, nlohmann::json results)
{
    nlohmann::json out;
    out["schema_version"] = kReportSchemaVersion;
    out["command"] = command;
    out["flags"] = std::move(flags);
    out["results"] = std::move(results);
    return out;
}

} // namespace aftexp
