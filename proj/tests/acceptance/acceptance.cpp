#include "../support/properties.hpp"

#include <aftexp/aftexp.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

using namespace aftexp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

enum class Verdict
{
    Pass,
    Fail,
    Skip
};

struct Criterion
{
    Verdict verdict = Verdict::Pass;
    std::vector<std::string> lines;

    void note(const std::string& text) { lines.push_back(text); }
    void check(bool ok, const std::string& text)
    {
        lines.push_back(std::string(ok ? "ok   " : "MISS ") + text);
        if (!ok) verdict = Verdict::Fail;
    }
};

std::string num(double v, int digits = 3)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

bool within(double got, double target, double rel) { return std::abs(got - target) <= rel * std::abs(target); }

std::string cell(const std::string& label, double got, double target, double rel)
{
    return label + " = " + num(got) + " (target " + num(target, 2) + ", band " + num(target * (1 - rel)) + ".." +
           num(target * (1 + rel)) + ")";
}

unsigned worker_count()
{
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Studies shared by several criteria are computed once.
std::map<std::string, StudyReport> study_cache;

const StudyReport& study(const std::string& key, const StudyConfig& config)
{
    auto it = study_cache.find(key);
    if (it == study_cache.end()) it = study_cache.emplace(key, run_study(config)).first;
    return it->second;
}

StudyConfig sparse_study(Index n, double rate, InterceptMode mode, LambdaRule rule)
{
    StudyConfig cfg;
    cfg.model = sparse_design_model(50);
    cfg.data.n = n;
    cfg.censoring_rate = rate;
    cfg.reps = 100;
    cfg.lambda_rule = rule;
    cfg.gamma = 2.0;
    cfg.intercept_mode = mode;
    cfg.seed = 20240;
    cfg.threads = worker_count();
    return cfg;
}

const MethodSummary& method(const StudyReport& r, Method m)
{
    for (const auto& s : r.methods)
        if (s.method == m) return s;
    throw Error(ErrorKind::Numerical, "method missing from study");
}

// Mean over active coordinates of the across-replication SD about the coordinate mean.
double within_coordinate_sd(const MethodSummary& s, const TrueModel& model)
{
    double total = 0.0;
    for (Index j : model.active_set) {
        double sum = 0.0;
        double sq = 0.0;
        int m = 0;
        for (const auto& r : s.replications) {
            if (!r.ok) continue;
            sum += r.estimate[j];
            sq += r.estimate[j] * r.estimate[j];
            ++m;
        }
        total += std::sqrt(std::max(0.0, (sq - sum * sum / m) / (m - 1)));
    }
    return total / double(model.active_set.size());
}

Criterion growing_design_table()
{
    Criterion c;
    const Index ns[] = {10, 50, 100, 200};
    const double paper_l2[] = {0.59, 0.25, 0.16, 0.12};
    const double paper_sd[] = {0.21, 0.09, 0.06, 0.05};
    const double paper_ls[] = {0.70, 0.37, 0.29, 0.27};
    for (int k = 0; k < 4; ++k) {
        StudyConfig cfg;
        cfg.model = growing_design_model(ns[k]);
        cfg.data.n = ns[k];
        cfg.data.covariates = growing_design_covariates();
        cfg.censoring_rate = 0.25;
        cfg.methods = {Method::Expectile, Method::LeastSquares};
        cfg.penalized = false;
        cfg.reps = 100;
        cfg.intercept_mode = InterceptMode::WithoutIntercept;
        cfg.seed = 1000 + ns[k];
        cfg.threads = worker_count();
        const auto r = run_study(cfg);
        const auto& e = method(r, Method::Expectile);
        const auto& ls = method(r, Method::LeastSquares);
        const std::string tag = "n=" + std::to_string(ns[k]) + " ";
        c.check(within(e.l2_error, paper_l2[k], 0.30), cell(tag + "expectile L2", e.l2_error, paper_l2[k], 0.30));
        c.check(within(e.sd_active, paper_sd[k], 0.30), cell(tag + "expectile SD", e.sd_active, paper_sd[k], 0.30));
        c.check(within(ls.l2_error, paper_ls[k], 0.30), cell(tag + "LS L2", ls.l2_error, paper_ls[k], 0.30));
        c.check(e.l2_error < ls.l2_error, tag + "expectile L2 < LS L2 (" + num(e.l2_error) + " < " + num(ls.l2_error) + ")");
        c.note("     " + tag + "sd of L2 norms " + num(e.sd_l2) + ", within-coordinate sd " +
               num(within_coordinate_sd(e, cfg.model)) + ", censoring " + num(r.mean_censoring_fraction) +
               ", excluded " + std::to_string(e.excluded + ls.excluded));
    }
    return c;
}

Criterion sparse_design_table()
{
    Criterion c;
    const Index ns[] = {400, 1000, 2000};
    const double paper_root[] = {0.34, 0.24, 0.25};
    const double paper_slow[] = {0.28, 0.20, 0.23};
    for (int k = 0; k < 3; ++k) {
        const std::string tag = "n=" + std::to_string(ns[k]) + " ";
        const auto& root = method(study("sqrt-n/" + std::to_string(ns[k]),
                                        sparse_study(ns[k], 0.25, InterceptMode::WithoutIntercept, LambdaRule::parse("sqrt-n"))),
                                  Method::Expectile);
        const auto& slow = method(study("n-0.4/0.25/without/" + std::to_string(ns[k]),
                                        sparse_study(ns[k], 0.25, InterceptMode::WithoutIntercept, LambdaRule::parse("n-0.4"))),
                                  Method::Expectile);
        c.check(within(root.l2_error, paper_root[k], 0.30), cell(tag + "sqrt-n L2", root.l2_error, paper_root[k], 0.30));
        c.check(within(slow.l2_error, paper_slow[k], 0.30), cell(tag + "n-0.4 L2", slow.l2_error, paper_slow[k], 0.30));
        c.check(within(root.sd_active, slow.sd_active, 0.20),
                tag + "SD equal across rules within 20% (" + num(root.sd_active) + " vs " + num(slow.sd_active) + ")");
        const TrueModel model = sparse_design_model(50);
        c.note("     " + tag + "sd of L2 norms " + num(root.sd_l2) + " / " + num(slow.sd_l2) + ", within-coordinate sd " +
               num(within_coordinate_sd(root, model)) + " / " + num(within_coordinate_sd(slow, model)));
    }
    return c;
}

Criterion oracle_sparsity()
{
    Criterion c;
    const auto& s = method(study("n-0.4/0.25/without/1000",
                                 sparse_study(1000, 0.25, InterceptMode::WithoutIntercept, LambdaRule::parse("n-0.4"))),
                           Method::Expectile);
    c.check(*s.pct_true_zeros >= 99.0, "true zeros " + num(*s.pct_true_zeros, 2) + "% >= 99%");
    c.check(*s.pct_false_zeros <= 2.0, "false zeros " + num(*s.pct_false_zeros, 2) + "% <= 2%");
    return c;
}

Criterion censoring_robustness()
{
    Criterion c;
    for (double rate : {0.10, 0.25}) {
        for (auto mode : {InterceptMode::WithoutIntercept, InterceptMode::WithIntercept}) {
            const std::string key = "n-0.4/" + num(rate, 2) + "/" + to_string(mode) + "/1000";
            const auto& s = method(study(key, sparse_study(1000, rate, mode, LambdaRule::parse("n-0.4"))), Method::Expectile);
            c.check(*s.pct_false_zeros <= 5.0, "rate " + num(rate, 2) + " " + to_string(mode) + " intercept: false zeros " +
                                                   num(*s.pct_false_zeros, 2) + "% <= 5% (true zeros " +
                                                   num(*s.pct_true_zeros, 2) + "%)");
        }
    }
    return c;
}

Criterion property_suite()
{
    Criterion c;
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::pair<std::string, std::function<property::Outcome()>>> suite{
        {"loss kernel", [] { return property::loss_kernel(); }},
        {"gradient vs central differences", [] { return property::gradient_vs_finite_differences(); }},
        {"IRLS monotone", [] { return property::irls_monotone(); }},
        {"tau 0.5 is weighted LS", [] { return property::half_tau_is_weighted_ls(); }},
        {"penalty limits", [] { return property::penalty_limits(); }},
        {"KKT certificates", [] { return property::kkt_certificates(); }},
        {"scalar penalized vs golden section", [] { return property::scalar_penalized_vs_golden(); }},
        {"KM oracles", [] { return property::km_oracles(); }},
        {"plug-in symmetric PSD", [] { return property::plug_in_symmetric_psd(); }},
    };
    for (const auto& [name, fn] : suite) {
        const auto out = fn();
        c.check(out.ok(), name + ": " + std::to_string(out.cases) + " cases, " + std::to_string(out.failures) +
                              " failures" + (out.ok() ? "" : " (" + out.first_failure + ")"));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.check(secs < 60.0, "runtime " + num(secs, 1) + " s < 60 s");
    return c;
}

Criterion inference_calibration()
{
    Criterion c;
    const TrueModel model = growing_design_model(500);
    const int reps = 200;
    const Index p = model.p();
    DataGenConfig cfg;
    cfg.n = 500;
    cfg.covariates = growing_design_covariates();
    cfg.seed = 777;
    cfg.c1 = calibrate_c1(model, cfg, 0.25, 0.005, 100000, 777);
    const ExpectileIndex tau(centering_tau(ErrorDist::Gumbel));
    const double z = normal_quantile(0.975);

    MatrixXd estimates(reps, p);
    MatrixXd ses(reps, p);
    std::vector<char> ok(reps, 0);
    parallel_for(std::size_t(reps), worker_count(), [&](std::size_t b) {
        DataGenConfig d = cfg;
        d.replication = std::uint64_t(b);
        const auto data = generate_dataset(d, model);
        const auto curve = fit_km(data.sample);
        const auto w = ipcw_weights(data.sample, curve);
        const auto fit = fit_censored_expectile(data.sample, tau, w);
        if (!fit.converged) return;
        const auto est = plug_in_estimate(plug_in_covariance(data.sample, fit, curve, w));
        estimates.row(b) = fit.beta.transpose();
        ses.row(b) = est.se.transpose();
        ok[b] = 1;
    });
    int used = 0;
    for (char v : ok) used += v;
    c.note("     " + std::to_string(used) + " of " + std::to_string(reps) + " replications converged");

    double worst_ratio = 1.0;
    Index worst_j = 0;
    int covered = 0;
    int total = 0;
    double min_cov = 1.0;
    double max_cov = 0.0;
    double ratio_sum = 0.0;
    for (Index j = 0; j < p; ++j) {
        double mean = 0.0;
        double mean_se = 0.0;
        for (int b = 0; b < reps; ++b)
            if (ok[b]) {
                mean += estimates(b, j);
                mean_se += ses(b, j);
            }
        mean /= used;
        mean_se /= used;
        double ss = 0.0;
        int cov_j = 0;
        for (int b = 0; b < reps; ++b)
            if (ok[b]) {
                ss += (estimates(b, j) - mean) * (estimates(b, j) - mean);
                if (std::abs(estimates(b, j) - model.coefficients[j]) <= z * ses(b, j)) ++cov_j;
            }
        const double sd = std::sqrt(ss / (used - 1));
        const double ratio = mean_se / sd;
        ratio_sum += ratio;
        if (std::abs(ratio - 1.0) > std::abs(worst_ratio - 1.0)) {
            worst_ratio = ratio;
            worst_j = j;
        }
        covered += cov_j;
        total += used;
        min_cov = std::min(min_cov, double(cov_j) / used);
        max_cov = std::max(max_cov, double(cov_j) / used);
        c.note("     coordinate " + std::to_string(j + 1) + ": empirical SD " + num(sd, 4) + ", mean plug-in SE " +
               num(mean_se, 4) + ", bias " + num(mean - model.coefficients[j], 4) + ", coverage " +
               num(100.0 * cov_j / used, 1) + "%");
    }
    c.note("     mean SE/SD ratio " + num(ratio_sum / p));
    c.check(std::abs(worst_ratio - 1.0) <= 0.25, "every coordinate's mean SE within 25% of its empirical SD (worst: coordinate " +
                                                     std::to_string(worst_j + 1) + ", ratio " + num(worst_ratio) + ")");
    const double coverage = double(covered) / total;
    c.check(coverage >= 0.90 && coverage <= 0.99, "pooled 95% coverage " + num(100 * coverage, 1) + "% in [90%, 99%] (per coordinate " +
                                                      num(100 * min_cov, 1) + "%.." + num(100 * max_cov, 1) + "%)");
    return c;
}

// Reads the survival-package layout (status 0/1/2) and recodes death as the event.
std::optional<Dataset> load_pbc(const std::string& path, const std::vector<std::string>& covariates)
{
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string line;
    std::getline(in, line);
    auto header = split_csv_line(line);
    Index status_col = -1;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == "status") status_col = Index(k);
        if (header[k] == "alk.phos") header[k] = "alk";
    }
    if (status_col < 0) throw Error(ErrorKind::Data, "pbc fixture has no status column");
    std::ostringstream out;
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << "\n";
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (Index(cells.size()) > status_col) {
            auto& s = cells[std::size_t(status_col)];
            if (s == "2") s = "1";
            else if (s == "1") s = "0";
        }
        for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
        out << "\n";
    }
    DatasetSchema schema;
    schema.covariate_columns = covariates;
    schema.standardize = true;
    return parse_csv(out.str(), schema, path);
}

Criterion real_data()
{
    Criterion c;
    const std::string path = std::string(AFTEXP_FIXTURE_DIR) + "/pbc.csv";
    if (!std::filesystem::exists(path)) {
        c.verdict = Verdict::Skip;
        c.note("     no fixture at " + path);
        return c;
    }
    const std::vector<std::string> vars{"age", "albumin", "alk", "ast", "bili", "chol", "copper", "platelet", "protime"};
    const auto data = load_pbc(path, vars);
    FitOptions opt;
    const auto report = run_fit(*data, opt);
    c.note("     n used " + std::to_string(data->sample.n()) + ", events " + std::to_string(data->sample.events()));
    const std::set<std::string> got(report.selected_variables.begin(), report.selected_variables.end());
    std::string listed;
    for (const auto& v : got) listed += (listed.empty() ? "" : ",") + v;
    c.check(got == std::set<std::string>{"albumin", "protime"}, "selection {" + listed + "} = {albumin,protime}");
    for (const auto& row : report.coefficients) {
        if (row.name == "albumin") c.check(within(row.estimate, 2.314, 0.10), cell("albumin", row.estimate, 2.314, 0.10));
        if (row.name == "protime") c.check(within(row.estimate, 2.084, 0.10), cell("protime", row.estimate, 2.084, 0.10));
    }
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Criterion()>>> criteria{
        {"growing-design accuracy table", growing_design_table},
        {"sparse-design accuracy table", sparse_design_table},
        {"oracle sparsity at n = 1000", oracle_sparsity},
        {"false zeros across censoring rates", censoring_robustness},
        {"property suite", property_suite},
        {"plug-in inference calibration", inference_calibration},
        {"real-data selection", real_data},
    };
    std::set<int> only;
    for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));

    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = int(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Criterion c;
        try {
            c = criteria[k].second();
        } catch (const std::exception& e) {
            c.verdict = Verdict::Fail;
            c.note(std::string("     error: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const auto& line : c.lines) std::printf("  %s\n", line.c_str());
        const char* tag = c.verdict == Verdict::Pass ? "PASS" : c.verdict == Verdict::Fail ? "FAIL" : "SKIP";
        std::printf("%s criterion %d: %s (%.1f s)\n", tag, id, criteria[k].first.c_str(), secs);
        std::fflush(stdout);
        if (c.verdict == Verdict::Fail) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
