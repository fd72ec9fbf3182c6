// aftexp: censored expectile regression for AFT models.
//
//   aftexp fit --data pbc.csv --time time --status status --covariates albumin,protime --standardize
//   aftexp simulate --n 400 --p 50 --censoring-rate 0.25 --reps 100 --out study
//   aftexp km --data pbc.csv --time time --status status
#include <aftexp/pipeline.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

using namespace aftexp;

int exit_code(ErrorKind kind)
{
    switch (kind) {
        case ErrorKind::Usage: return 2;
        case ErrorKind::Data: return 3;
        case ErrorKind::Numerical: return 4;
    }
    return 4;
}

int report_error(ErrorKind kind, const std::string& message)
{
    nlohmann::json err;
    err["schema_version"] = kReportSchemaVersion;
    err["error"] = {{"kind", to_string(kind)}, {"message", message}};
    std::cerr << err.dump() << "\n";
    return exit_code(kind);
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto a = item.find_first_not_of(' ');
        const auto b = item.find_last_not_of(' ');
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

struct DataFlags
{
    std::string path;
    std::string time = "time";
    std::string status = "status";
    std::string covariates;
    bool standardize = false;
    std::string convention = "censoring";

    void attach(CLI::App* cmd, bool need_covariates)
    {
        cmd->add_option("--data", path, "input CSV with a header row")->required();
        cmd->add_option("--time", time, "follow-up time column");
        cmd->add_option("--status", status, "event indicator column (1 = event)");
        auto* cov = cmd->add_option("--covariates", covariates, "comma-separated covariate columns");
        if (need_covariates) cov->required();
        cmd->add_flag("--standardize", standardize, "centre and scale covariates");
        cmd->add_option("--km-convention", convention, "censoring | paper-literal")
            ->check(CLI::IsMember({"censoring", "paper-literal"}));
    }

    KmConvention km() const
    {
        return convention == "paper-literal" ? KmConvention::PaperLiteral : KmConvention::CensoringSurvival;
    }

    DatasetSchema schema() const
    {
        DatasetSchema s;
        s.time_column = time;
        s.status_column = status;
        s.covariate_columns = split_list(covariates);
        s.standardize = standardize;
        return s;
    }
};

struct FitFlags
{
    DataFlags data;
    double tau = 0.5;
    std::optional<double> lambda;
    double gamma = 2.0;
    bool penalize = true;
    bool intercept = true;
    std::string se = "plugin";
    int boot_reps = 200;
    std::uint64_t seed = 1;
    double g_floor = 0.01;
    double level = 0.95;
    unsigned threads = 1;
    std::string json_out;
    std::string format = "table";
};

int run_fit_command(const FitFlags& f)
{
    const auto data = read_csv(f.data.path, f.data.schema());
    FitOptions opt;
    opt.tau = f.tau;
    opt.lambda = f.lambda;
    opt.gamma = f.gamma;
    opt.penalize = f.penalize;
    opt.intercept = f.intercept;
    opt.se = f.se == "bootstrap" ? SeMethod::Bootstrap : SeMethod::PlugIn;
    opt.boot_reps = f.boot_reps;
    opt.seed = f.seed;
    opt.convention = f.data.km();
    opt.g_floor = f.g_floor;
    opt.level = f.level;
    opt.threads = f.threads;
    const auto report = run_fit(data, opt);

    nlohmann::json flags;
    flags["data"] = f.data.path;
    flags["time"] = f.data.time;
    flags["status"] = f.data.status;
    flags["covariates"] = data.covariate_names;
    flags["standardize"] = f.data.standardize;
    flags["km_convention"] = f.data.convention;
    flags["tau"] = f.tau;
    flags["lambda"] = f.lambda ? nlohmann::json(*f.lambda) : nlohmann::json(nullptr);
    flags["gamma"] = f.gamma;
    flags["penalize"] = f.penalize;
    flags["intercept"] = f.intercept;
    flags["se"] = f.se;
    flags["boot_reps"] = f.boot_reps;
    flags["seed"] = f.seed;
    flags["g_floor"] = f.g_floor;
    flags["level"] = f.level;
    const auto doc = make_envelope("fit", std::move(flags), to_json(report)).dump(2) + "\n";
    if (!f.json_out.empty()) write_file_atomic(f.json_out, doc);
    std::cout << (f.format == "json" ? doc : format_table(report));
    return 0;
}

struct SimulateFlags
{
    Index n = 100;
    Index p = 50;
    std::string design;
    std::string error = "gumbel";
    std::optional<double> rate;
    std::optional<double> c1;
    std::string lambda_rule = "n-0.4";
    double gamma = 2.0;
    std::string methods = "expectile";
    std::string intercept_mode = "without";
    std::optional<bool> penalize;
    std::optional<double> tau;
    int reps = 100;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string out;
};

StudyConfig study_config(const SimulateFlags& f)
{
    const std::string design = f.design.empty() ? (f.p == 2 ? "growing" : "sparse") : f.design;
    if (f.n < 10) throw Error(ErrorKind::Usage, "--n must be at least 10");
    if (f.reps < 1) throw Error(ErrorKind::Usage, "--reps must be at least 1");
    if (design == "growing" && f.p != 2) throw Error(ErrorKind::Usage, "--design growing has p = 2");
    if (design == "sparse" && f.p < 5) throw Error(ErrorKind::Usage, "--design sparse needs --p >= 5");
    if (f.rate && f.c1) throw Error(ErrorKind::Usage, "give either --censoring-rate or --c1, not both");
    if (f.rate && !(*f.rate > 0 && *f.rate < 1)) {
        throw Error(ErrorKind::Usage, "--censoring-rate must lie in (0, 1)");
    }
    if (f.c1 && !(*f.c1 > 0)) throw Error(ErrorKind::Usage, "--c1 must be positive");
    if (!(f.gamma > 0)) throw Error(ErrorKind::Usage, "--gamma must be positive");
    if (f.tau && !(*f.tau > 0 && *f.tau < 1)) throw Error(ErrorKind::Usage, "--tau must lie in (0, 1)");
    if (f.out.empty()) throw Error(ErrorKind::Usage, "--out is required");

    StudyConfig c;
    c.model = design == "growing" ? growing_design_model(f.n) : sparse_design_model(f.p);
    c.data.n = f.n;
    c.data.error = f.error == "shifted-uniform" ? ErrorDist::ShiftedUniform : ErrorDist::Gumbel;
    if (design == "growing") c.data.covariates = growing_design_covariates();
    if (f.c1) c.data.c1 = *f.c1;
    c.censoring_rate = f.rate;
    if (!f.rate && !f.c1) c.censoring_rate = 0.25;
    c.methods.clear();
    for (const auto& m : split_list(f.methods)) {
        if (m == "expectile") c.methods.push_back(Method::Expectile);
        else if (m == "ls") c.methods.push_back(Method::LeastSquares);
        else throw Error(ErrorKind::Usage, "unknown method '" + m + "' (expectile, ls)");
    }
    if (c.methods.empty()) throw Error(ErrorKind::Usage, "--methods is empty");
    c.penalized = f.penalize.value_or(design == "sparse");
    c.reps = f.reps;
    c.lambda_rule = LambdaRule::parse(f.lambda_rule);
    c.gamma = f.gamma;
    c.intercept_mode = f.intercept_mode == "with" ? InterceptMode::WithIntercept : InterceptMode::WithoutIntercept;
    c.tau = f.tau;
    c.seed = f.seed;
    c.threads = f.threads;
    return c;
}

int run_simulate_command(const SimulateFlags& f)
{
    const auto config = study_config(f);
    const auto report = run_study(config);

    nlohmann::json flags;
    flags["n"] = f.n;
    flags["p"] = config.model.p();
    flags["design"] = config.data.covariates.empty() ? "sparse" : "growing";
    flags["error"] = to_string(config.data.error);
    flags["censoring_rate"] = config.censoring_rate ? nlohmann::json(*config.censoring_rate) : nlohmann::json(nullptr);
    flags["c1"] = f.c1 ? nlohmann::json(*f.c1) : nlohmann::json(nullptr);
    flags["lambda_rule"] = config.lambda_rule.label();
    flags["gamma"] = config.gamma;
    flags["methods"] = split_list(f.methods);
    flags["intercept_mode"] = to_string(config.intercept_mode);
    flags["penalize"] = config.penalized;
    flags["tau"] = f.tau ? nlohmann::json(*f.tau) : nlohmann::json(nullptr);
    flags["reps"] = f.reps;
    flags["seed"] = f.seed;
    write_file_atomic(f.out + ".json", make_envelope("simulate", std::move(flags), to_json(report)).dump(2) + "\n");
    write_file_atomic(f.out + ".csv", study_csv(report, config));
    for (const auto& m : report.methods) {
        std::cout << to_string(m.method) << ": L2 " << m.l2_error << ", SD " << m.sd_active;
        if (m.pct_true_zeros) std::cout << ", true zeros " << *m.pct_true_zeros << "%";
        if (m.pct_false_zeros) std::cout << ", false zeros " << *m.pct_false_zeros << "%";
        std::cout << " (" << m.reps_used << " reps)\n";
    }
    return 0;
}

int run_km_command(const DataFlags& f, const std::string& out)
{
    auto schema = f.schema();
    if (schema.covariate_columns.empty()) schema.covariate_columns = {f.time};  // only (y, delta) matter
    const auto data = read_csv(f.path, schema);
    const auto curve = fit_km(data.sample, f.km());
    const auto csv = km_curve_csv(curve, data.sample.y().maxCoeff());
    if (out.empty()) {
        std::cout << csv;
    } else {
        write_file_atomic(out, csv);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Censored expectile regression for accelerated failure time models"};
    app.require_subcommand(1);

    FitFlags fit;
    auto* fit_cmd = app.add_subcommand("fit", "fit a censored (adaptive-LASSO) expectile model to a CSV dataset");
    fit.data.attach(fit_cmd, true);
    fit_cmd->add_option("--tau", fit.tau, "expectile level");
    fit_cmd->add_option("--lambda", fit.lambda, "penalty level (default n^0.4)");
    fit_cmd->add_option("--gamma", fit.gamma, "adaptive weight exponent");
    fit_cmd->add_flag("--penalize,!--no-penalize", fit.penalize, "adaptive-LASSO selection");
    fit_cmd->add_flag("--intercept,!--no-intercept", fit.intercept, "fit an unpenalized intercept");
    fit_cmd->add_option("--se", fit.se, "plugin | bootstrap")->check(CLI::IsMember({"plugin", "bootstrap"}));
    fit_cmd->add_option("--boot-reps", fit.boot_reps, "bootstrap replicates");
    fit_cmd->add_option("--seed", fit.seed, "bootstrap seed");
    fit_cmd->add_option("--g-floor", fit.g_floor, "lower bound on the censoring survival in weights");
    fit_cmd->add_option("--level", fit.level, "confidence level");
    fit_cmd->add_option("--threads", fit.threads, "worker threads for the bootstrap");
    fit_cmd->add_option("--json", fit.json_out, "write the JSON report to this file");
    fit_cmd->add_option("--format", fit.format, "stdout format: table | json")
        ->check(CLI::IsMember({"table", "json"}));

    SimulateFlags sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study; writes <out>.json and <out>.csv");
    sim_cmd->add_option("--n", sim.n, "sample size");
    sim_cmd->add_option("--p", sim.p, "number of covariates");
    sim_cmd->add_option("--design", sim.design, "sparse | growing (default: growing when p = 2)")
        ->check(CLI::IsMember({"sparse", "growing"}));
    sim_cmd->add_option("--error", sim.error, "gumbel | shifted-uniform")
        ->check(CLI::IsMember({"gumbel", "shifted-uniform"}));
    sim_cmd->add_option("--censoring-rate", sim.rate, "target censoring rate (default 0.25)");
    sim_cmd->add_option("--c1", sim.c1, "censoring bound, C ~ U[0, c1]");
    sim_cmd->add_option("--lambda-rule", sim.lambda_rule, "sqrt-n | n-0.4 | fixed:<v>");
    sim_cmd->add_option("--gamma", sim.gamma, "adaptive weight exponent");
    sim_cmd->add_option("--methods", sim.methods, "comma-separated: expectile, ls");
    sim_cmd->add_option("--intercept-mode", sim.intercept_mode, "with | without")
        ->check(CLI::IsMember({"with", "without"}));
    sim_cmd->add_flag("--penalize,!--no-penalize", sim.penalize, "adaptive-LASSO (default: sparse design)");
    sim_cmd->add_option("--tau", sim.tau, "expectile level (default: centering tau of the error law)");
    sim_cmd->add_option("--reps", sim.reps, "Monte Carlo replications");
    sim_cmd->add_option("--seed", sim.seed, "master seed");
    sim_cmd->add_option("--threads", sim.threads, "worker threads");
    sim_cmd->add_option("--out", sim.out, "output prefix")->required();

    DataFlags km;
    std::string km_out;
    auto* km_cmd = app.add_subcommand("km", "export the censoring survival curve as CSV");
    km.attach(km_cmd, false);
    km_cmd->add_option("--out", km_out, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return report_error(ErrorKind::Usage, e.what());
    }

    try {
        if (fit_cmd->parsed()) return run_fit_command(fit);
        if (sim_cmd->parsed()) return run_simulate_command(sim);
        return run_km_command(km, km_out);
    } catch (const Error& e) {
        return report_error(e.kind(), e.what());
    } catch (const std::exception& e) {
        return report_error(ErrorKind::Numerical, e.what());
    }
}
