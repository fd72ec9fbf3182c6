#include <aftexp/simulation.hpp>

#include <aftexp/error.hpp>
#include <aftexp/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <limits>
#include <sstream>

namespace aftexp {

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

// Substream ids of make_stream.
constexpr std::uint64_t kCovariateStream = 0;
constexpr std::uint64_t kErrorStream = 1;
constexpr std::uint64_t kCensoringStream = 2;
constexpr std::uint64_t kCalibrationStream = 3;

double mean_of(const std::vector<double>& v)
{
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double sd_of(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / double(v.size() - 1));
}

} // namespace

TrueModel::TrueModel(Eigen::VectorXd coefs, double icpt)
    : coefficients(std::move(coefs)), intercept(icpt)
{
    for (Index j = 0; j < coefficients.size(); ++j) {
        if (coefficients[j] != 0.0) active_set.push_back(j);
    }
    q = static_cast<Index>(active_set.size());
}

TrueModel sparse_design_model(Index p, double intercept)
{
    if (p < 5) throw Error(ErrorKind::Usage, "the sparse design needs p >= 5");
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta.head(5) << 0.9, -2.0, 0.5, 1.0, -1.0;
    return TrueModel(std::move(beta), intercept);
}

TrueModel growing_design_model(Index n)
{
    if (n < 2) throw Error(ErrorKind::Usage, "the growing design needs n >= 2");
    const double ln = std::log(double(n));
    Eigen::VectorXd beta(2);
    beta << 5.0 * ln, ln;
    return TrueModel(std::move(beta));
}

std::vector<NormalLaw> growing_design_covariates()
{
    return {NormalLaw{1.0, 1.0}, NormalLaw{1.0, std::sqrt(5.0)}};
}

NormalLaw DataGenConfig::covariate_law(Index j) const
{
    if (covariates.empty()) return NormalLaw{};
    if (j >= static_cast<Index>(covariates.size())) {
        throw Error(ErrorKind::Usage, "no covariate law configured for column " + std::to_string(j));
    }
    return covariates[static_cast<std::size_t>(j)];
}

double sample_error(ErrorDist dist, Rng& gen)
{
    switch (dist) {
        case ErrorDist::Gumbel: return -std::log(-std::log(open_uniform(gen)));
        case ErrorDist::ShiftedUniform: return -1.0 + 3.0 * open_uniform(gen) - 1.0 / 6.0;
        case ErrorDist::Zero: return 0.0;
    }
    return 0.0;
}

namespace {

Eigen::MatrixXd draw_covariates(const DataGenConfig& config, Index n, Index p, Rng& gen)
{
    Eigen::MatrixXd x(n, p);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            const auto law = config.covariate_law(j);
            x(i, j) = law.mean + law.sd * normal(gen);
        }
    }
    return x;
}

} // namespace

GeneratedData generate_dataset(const DataGenConfig& config, const TrueModel& model)
{
    if (config.n < 1) throw Error(ErrorKind::Usage, "sample size must be at least 1");
    if (!(config.c1 > 0)) throw Error(ErrorKind::Usage, "censoring bound c1 must be positive");
    const Index n = config.n;
    const Index p = model.p();

    auto cov_gen = make_stream(config.seed, config.replication, kCovariateStream);
    auto err_gen = make_stream(config.seed, config.replication, kErrorStream);
    auto cens_gen = make_stream(config.seed, config.replication, kCensoringStream);

    GeneratedData out;
    Eigen::MatrixXd x = draw_covariates(config, n, p, cov_gen);
    out.errors.resize(n);
    out.censoring.resize(n);
    out.log_t.resize(n);
    Eigen::VectorXd y(n);
    Eigen::VectorXi delta(n);
    const double log_c1 = std::log(config.c1);
    Index censored = 0;
    for (Index i = 0; i < n; ++i) {
        out.errors[i] = sample_error(config.error, err_gen);
        out.log_t[i] = model.intercept + x.row(i).dot(model.coefficients) + out.errors[i];
        const double log_c = log_c1 + std::log(open_uniform(cens_gen));
        out.censoring[i] = std::exp(log_c);
        delta[i] = out.log_t[i] <= log_c ? 1 : 0;
        // work on the log scale so huge latent times never overflow
        y[i] = std::exp(std::min(out.log_t[i], log_c));
        if (!(y[i] > 0)) y[i] = std::numeric_limits<double>::min();
        censored += 1 - delta[i];
    }
    out.censoring_fraction = double(censored) / double(n);
    out.sample = SurvivalSample<double>(std::move(y), std::move(delta), std::move(x));
    return out;
}

double calibrate_c1(const TrueModel& model, const DataGenConfig& config, double target_rate,
                    double tol, Index draws, std::uint64_t seed)
{
    if (!(target_rate > 0 && target_rate < 1)) {
        throw Error(ErrorKind::Usage, "target censoring rate must lie in (0, 1)");
    }
    if (!(tol > 0) || draws < 1) throw Error(ErrorKind::Usage, "invalid calibration tolerance or size");

    // T > C  <=>  log T - log U > log c1, with C = c1 U. Common random numbers
    // make the estimated rate a monotone step function of log c1.
    auto gen = make_stream(seed, 0, kCalibrationStream);
    const Eigen::MatrixXd x = draw_covariates(config, draws, model.p(), gen);
    std::vector<double> excess(static_cast<std::size_t>(draws));
    for (Index k = 0; k < draws; ++k) {
        const double log_t = model.intercept + x.row(k).dot(model.coefficients) + sample_error(config.error, gen);
        excess[static_cast<std::size_t>(k)] = log_t - std::log(open_uniform(gen));
    }
    std::sort(excess.begin(), excess.end());
    auto rate = [&](double log_c1) {
        const auto above = excess.end() - std::upper_bound(excess.begin(), excess.end(), log_c1);
        return double(above) / double(draws);
    };

    double lo = -700.0;  // rate(lo) should be ~1
    double hi = 700.0;   // rate(hi) should be ~0
    if (rate(lo) < target_rate || rate(hi) > target_rate) {
        throw Error(ErrorKind::Numerical, "could not bracket the censoring bound for the target rate");
    }
    double best = 0.5 * (lo + hi);
    double best_gap = std::abs(rate(best) - target_rate);
    for (int it = 0; it < 200 && best_gap > 0.2 * tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r = rate(mid);
        if (std::abs(r - target_rate) < best_gap) {
            best = mid;
            best_gap = std::abs(r - target_rate);
        }
        if (r > target_rate) lo = mid; else hi = mid;
    }
    if (best_gap > tol) {
        throw Error(ErrorKind::Numerical, "censoring bound calibration did not reach the tolerance");
    }
    return std::exp(best);
}

double centering_tau(ErrorDist dist)
{
    switch (dist) {
        case ErrorDist::Gumbel: {
            // eps = -log V with V ~ Exp(1): A = int_0^1 -log(v) e^-v dv
            //   = sum_k (-1)^k / (k! (k + 1)^2), and A - B = E[eps] = Euler's constant.
            double a = 0.0;
            double term = 1.0;  // (-1)^k / k!
            for (int k = 0; k < 40; ++k) {
                a += term / double((k + 1) * (k + 1));
                term *= -1.0 / double(k + 1);
            }
            const double b = a - kEulerGamma;
            return b / (a + b);
        }
        case ErrorDist::ShiftedUniform: {
            // density 1/3 on [-7/6, 11/6]: A = 121/216, B = 49/216
            constexpr double a = 121.0 / 216.0;
            constexpr double b = 49.0 / 216.0;
            return b / (a + b);
        }
        case ErrorDist::Zero: return 0.5;
    }
    return 0.5;
}

double LambdaRule::operator()(Index n) const
{
    switch (kind) {
        case Kind::SqrtN: return std::sqrt(double(n));
        case Kind::Pow04: return default_lambda<double>(n);
        case Kind::Fixed: return value;
    }
    return 0.0;
}

std::string LambdaRule::label() const
{
    switch (kind) {
        case Kind::SqrtN: return "sqrt-n";
        case Kind::Pow04: return "n-0.4";
        case Kind::Fixed: {
            std::ostringstream os;
            os.precision(17);
            os << "fixed:" << value;
            return os.str();
        }
    }
    return "";
}

LambdaRule LambdaRule::parse(const std::string& text)
{
    if (text == "sqrt-n") return LambdaRule{Kind::SqrtN, 0.0};
    if (text == "n-0.4") return LambdaRule{Kind::Pow04, 0.0};
    if (text.rfind("fixed:", 0) == 0) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text.substr(6), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size() - 6 || !(v >= 0)) {
            throw Error(ErrorKind::Usage, "invalid fixed lambda in '" + text + "'");
        }
        return LambdaRule{Kind::Fixed, v};
    }
    throw Error(ErrorKind::Usage, "unknown lambda rule '" + text + "' (sqrt-n, n-0.4, fixed:<v>)");
}

std::string to_string(Method m)
{
    return m == Method::Expectile ? "expectile" : "ls";
}

std::string to_string(ErrorDist d)
{
    switch (d) {
        case ErrorDist::Gumbel: return "gumbel";
        case ErrorDist::ShiftedUniform: return "shifted-uniform";
        case ErrorDist::Zero: return "zero";
    }
    return "";
}

std::string to_string(InterceptMode m)
{
    return m == InterceptMode::WithIntercept ? "with" : "without";
}

std::optional<double> percent_true_zeros(const std::vector<IndexSet>& selections, const TrueModel& model)
{
    const Index zeros = model.p() - model.q;
    if (zeros == 0 || selections.empty()) return std::nullopt;
    double total = 0.0;
    for (const auto& sel : selections) {
        Index hits = 0;  // |A_hat^c  intersect  A^c|
        for (Index j = 0; j < model.p(); ++j) {
            const bool estimated_zero = std::find(sel.begin(), sel.end(), j) == sel.end();
            if (estimated_zero && model.coefficients[j] == 0.0) ++hits;
        }
        total += double(hits) / double(zeros);
    }
    return 100.0 * total / double(selections.size());
}

std::optional<double> percent_false_zeros(const std::vector<IndexSet>& selections, const TrueModel& model)
{
    if (model.q == 0 || selections.empty()) return std::nullopt;
    double total = 0.0;
    for (const auto& sel : selections) {
        Index misses = 0;  // |A_hat^c  intersect  A|
        for (Index j : model.active_set) {
            if (std::find(sel.begin(), sel.end(), j) == sel.end()) ++misses;
        }
        total += double(misses) / double(model.q);
    }
    return 100.0 * total / double(selections.size());
}

ReplicationRecord fit_replication(const GeneratedData& data, const TrueModel& model, Method method,
                                  double tau_value, const StudyConfig& config)
{
    ReplicationRecord rec;
    rec.censoring_fraction = data.censoring_fraction;
    try {
        const bool icpt = config.intercept_mode == InterceptMode::WithIntercept;
        const auto sample = icpt ? data.sample.with_intercept() : data.sample;
        const ExpectileIndex<double> tau(method == Method::LeastSquares ? 0.5 : tau_value);
        const auto weights = censoring_weights(sample, config.weights);

        Eigen::VectorXd beta;
        if (config.penalized) {
            const auto pilot = fit_censored_expectile(sample, tau, weights, config.solver);
            PenaltySpec<double> penalty;
            penalty.lambda = config.lambda_rule(sample.n());
            penalty.gamma = config.gamma;
            penalty.adaptive_weights = adaptive_weights(pilot.beta, config.gamma);
            const auto fit = fit_censored_alasso(sample, tau, weights, penalty, config.solver,
                                                 std::optional<Eigen::VectorXd>(pilot.beta));
            beta = fit.beta;
        } else {
            beta = fit_censored_expectile(sample, tau, weights, config.solver).beta;
        }
        rec.intercept = icpt ? beta[0] : 0.0;
        rec.estimate = beta.tail(model.p());
        for (Index j = 0; j < model.p(); ++j) {
            if (rec.estimate[j] != 0.0) rec.selected.push_back(j);
        }
        double sq = (rec.estimate - model.coefficients).squaredNorm();
        if (icpt) sq += (rec.intercept - model.intercept) * (rec.intercept - model.intercept);
        rec.l2_error = std::sqrt(sq);
        rec.ok = true;
    } catch (const Error& e) {
        rec.failure = e.what();
    }
    return rec;
}

StudyReport run_study(const StudyConfig& config)
{
    if (config.reps < 1) throw Error(ErrorKind::Usage, "a study needs at least one replication");
    if (config.methods.empty()) throw Error(ErrorKind::Usage, "a study needs at least one method");
    if (config.model.p() < 1) throw Error(ErrorKind::Usage, "the true model has no coefficients");

    StudyReport report;
    report.reps = config.reps;
    DataGenConfig data = config.data;
    data.seed = config.seed;
    if (config.censoring_rate) {
        data.c1 = calibrate_c1(config.model, data, *config.censoring_rate, 0.005, 100000, config.seed);
    }
    report.c1 = data.c1;

    const double tau = config.tau ? *config.tau : centering_tau(data.error);
    const auto reps = static_cast<std::size_t>(config.reps);
    const std::size_t n_methods = config.methods.size();
    std::vector<ReplicationRecord> records(reps * n_methods);
    std::vector<double> fractions(reps);

    parallel_for(reps, config.threads, [&](std::size_t l) {
        DataGenConfig d = data;
        d.replication = l;
        const auto generated = generate_dataset(d, config.model);
        fractions[l] = generated.censoring_fraction;
        for (std::size_t m = 0; m < n_methods; ++m) {
            records[l * n_methods + m] = fit_replication(generated, config.model, config.methods[m], tau, config);
        }
    });
    report.mean_censoring_fraction = mean_of(fractions);

    for (std::size_t m = 0; m < n_methods; ++m) {
        MethodSummary s;
        s.method = config.methods[m];
        s.tau = s.method == Method::LeastSquares ? 0.5 : tau;
        std::vector<IndexSet> selections;
        std::vector<double> l2;
        std::vector<double> active_errors;
        for (std::size_t l = 0; l < reps; ++l) {
            auto& rec = records[l * n_methods + m];
            if (!rec.ok) {
                ++s.excluded;
            } else {
                selections.push_back(rec.selected);
                l2.push_back(rec.l2_error);
                for (Index j : config.model.active_set) {
                    active_errors.push_back(rec.estimate[j] - config.model.coefficients[j]);
                }
            }
            s.replications.push_back(std::move(rec));
        }
        if (s.excluded * 20 > config.reps) {
            throw Error(ErrorKind::Numerical, std::to_string(s.excluded) + " of " +
                                                  std::to_string(config.reps) + " replications failed for " +
                                                  to_string(s.method));
        }
        s.reps_used = static_cast<int>(l2.size());
        s.pct_true_zeros = percent_true_zeros(selections, config.model);
        s.pct_false_zeros = percent_false_zeros(selections, config.model);
        s.l2_error = mean_of(l2);
        s.sd_l2 = sd_of(l2);
        s.sd_active = sd_of(active_errors);
        report.methods.push_back(std::move(s));
    }
    return report;
}

} // namespace aftexp
