#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "apgw/digest.hpp"
#include "apgw/distribution.hpp"
#include "apgw/errors.hpp"
#include "apgw/model.hpp"
#include "apgw/optimizer.hpp"
#include "apgw/rng.hpp"

// Random-variate generation by quantile inversion, exponential-censoring
// calibration to a target rate, and the replication engine behind the
// bundled simulation study designs.  Replicates run on independent streams
// derived from (seed, nu index, replicate index); aggregation order is fixed
// by replicate index, so results do not depend on scheduling.

namespace apgw {

struct CovariateLaw {
    enum class Kind { None, Bernoulli };
    Kind kind = Kind::None;
    double prob = 0.5;

    int n_covariates() const { return kind == Kind::None ? 0 : 1; }
};

/// One lifetime by inverse-CDF sampling.  For cure models, draws beyond the
/// cure plateau return +inf ("cured"); the caller must censor them.
inline double sample_lifetime(const ApgwParams& p, Rng& rng) {
    const double u = rng.uniform();
    if (p.is_cure() && u >= 1.0 - cure_probability(p))
        return std::numeric_limits<double>::infinity();
    const double t = quantile(u, p);
    return t > 0.0 ? t : std::numeric_limits<double>::min();
}

/// Lifetime from the kappa -> inf (Gompertz-type) limit H = lambda(e^{(phi t)^gamma}-1).
inline double sample_gompertz_lifetime(double phi, double lambda, double gamma, Rng& rng) {
    const double y = -std::log1p(-rng.uniform());
    const double t = std::pow(std::log1p(y / lambda), 1.0 / gamma) / phi;
    return t > 0.0 ? t : std::numeric_limits<double>::min();
}

inline constexpr double kNuInfinity = std::numeric_limits<double>::infinity();

struct ScenarioConfig {
    int n = 1000;
    RegressionCoefficients true_coefs;
    std::vector<double> nu_grid;  // empty: use true_coefs.nu[0]; entries may be +inf
    double target_censoring = 0.0;
    int n_replicates = 1;
    std::vector<ModelSpec> fit_specs;
    std::uint64_t seed = 0;
    CovariateLaw covariate_law;
    OptimizerConfig optimizer;
    std::vector<double> survivor_probe_u;  // e.g. {0.1,0.5,0.9}; empty disables probes
    int n_threads = 0;                     // 0 = hardware concurrency

    void validate() const {
        if (n < 10) throw ConfigError("scenario n must be >= 10");
        if (n_replicates < 1) throw ConfigError("scenario replicates must be >= 1");
        if (!(target_censoring >= 0.0 && target_censoring < 1.0))
            throw ConfigError("target censoring must lie in [0,1)");
        if (!true_coefs.same_shape() ||
            true_coefs.size() != covariate_law.n_covariates() + 1)
            throw ConfigError("true coefficient blocks do not match the covariate law");
        if (fit_specs.empty()) throw ConfigError("scenario needs at least one fit spec");
        for (const auto& s : fit_specs) {
            s.validate();
            if (s.n_covariates != covariate_law.n_covariates())
                throw ConfigError("fit spec " + s.name() + " does not match the covariate law");
        }
        optimizer.validate();
    }
};

namespace detail {

inline void parallel_for(int n_items, int n_threads, const std::function<void(int)>& body) {
    if (n_threads <= 0)
        n_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min(n_threads, n_items);
    if (n_threads <= 1) {
        for (int i = 0; i < n_items; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n_items) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Draws the raw covariate row for one subject.
inline void draw_covariates(const CovariateLaw& law, Rng& rng, Eigen::RowVectorXd& x) {
    if (law.kind == CovariateLaw::Kind::Bernoulli) x[0] = rng.bernoulli(law.prob) ? 1.0 : 0.0;
}

// One lifetime under the scenario truth with nu0 overridden (possibly +inf).
inline double draw_scenario_lifetime(const RegressionCoefficients& truth, double nu0,
                                     const Eigen::RowVectorXd& x, Rng& rng) {
    if (std::isinf(nu0)) {
        RegressionCoefficients c = truth;
        c.nu.setZero();
        const ApgwParams base = subject_params(c, x);
        return sample_gompertz_lifetime(base.phi, base.lambda, base.gamma, rng);
    }
    RegressionCoefficients c = truth;
    c.nu[0] = nu0;
    return sample_lifetime(subject_params(c, x), rng);
}

}  // namespace detail

/// Finds the exponential censoring rate whose expected censoring proportion
/// matches the target to +/-0.005, by bisection against a Monte-Carlo sample
/// of lifetimes (P(C < T | T) = 1 - e^{-rate T} is averaged exactly, so the
/// map rate -> proportion is smooth and increasing).  Target 0 returns rate 0
/// by convention; targets below the cure mass are unattainable.
inline double calibrate_censoring_rate(double target,
                                       const std::function<double(Rng&)>& draw_lifetime,
                                       std::uint64_t stream_seed, int n_draws = 100000) {
    if (!(target >= 0.0 && target < 1.0))
        throw ConfigError("target censoring must lie in [0,1)");
    if (target == 0.0) return 0.0;
    Rng rng(stream_seed);
    std::vector<double> lifetimes(static_cast<std::size_t>(n_draws));
    double cured = 0.0;
    for (auto& t : lifetimes) {
        t = draw_lifetime(rng);
        if (std::isinf(t)) cured += 1.0;
    }
    const double min_achievable = cured / n_draws;
    if (target < min_achievable - 0.005)
        throw ConfigError("unattainable censoring target " + std::to_string(target) +
                          ": cure mass alone censors ~" + std::to_string(min_achievable));
    auto proportion = [&](double rate) {
        double acc = 0.0;
        for (double t : lifetimes) acc += std::isinf(t) ? 1.0 : -std::expm1(-rate * t);
        return acc / n_draws;
    };
    double lo = 0.0, hi = 1.0;
    while (proportion(hi) < target) {
        hi *= 2.0;
        if (hi > 1e12) return hi;  // target ~1: effectively immediate censoring
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double prop = proportion(mid);
        if (std::abs(prop - target) <= 0.005) return mid;
        (prop < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Censoring rate for one nu point of a scenario.
inline double calibrate_censoring(const ScenarioConfig& scenario, double nu0) {
    scenario.validate();
    Eigen::RowVectorXd x(scenario.covariate_law.n_covariates());
    x.setZero();
    const std::uint64_t stream =
        derive_stream(scenario.seed, 0xCA11B8A7EULL, std::isinf(nu0) ? 0x1FULL
                                                                      : fnv1a64(&nu0, sizeof(nu0)));
    return calibrate_censoring_rate(
        scenario.target_censoring,
        [&](Rng& rng) {
            Eigen::RowVectorXd row = x;
            detail::draw_covariates(scenario.covariate_law, rng, row);
            return detail::draw_scenario_lifetime(scenario.true_coefs, nu0, row, rng);
        },
        stream);
}

/// One simulated dataset under the scenario truth at the given nu point.
inline SurvivalDataset generate_dataset(const ScenarioConfig& scenario, double nu0,
                                        double censoring_rate, std::uint64_t stream_seed) {
    Rng rng(stream_seed);
    const int p = scenario.covariate_law.n_covariates();
    SurvivalDataset data;
    data.times.resize(scenario.n);
    data.status.resize(scenario.n);
    data.covariates.resize(scenario.n, p);
    if (p > 0) data.names = {"x1"};
    Eigen::RowVectorXd x(p);
    x.setZero();
    for (int i = 0; i < scenario.n; ++i) {
        detail::draw_covariates(scenario.covariate_law, rng, x);
        for (int j = 0; j < p; ++j) data.covariates(i, j) = x[j];
        const double lifetime =
            detail::draw_scenario_lifetime(scenario.true_coefs, nu0, x, rng);
        const double censor = rng.exponential(censoring_rate);
        if (std::isinf(lifetime) && std::isinf(censor))
            throw Error("cured lifetime with no censoring distribution; "
                        "raise the target censoring above the cure mass");
        data.times[i] = std::min(lifetime, censor);
        data.status[i] = lifetime <= censor ? 1 : 0;
    }
    return data;
}

/// Result of fitting one spec to one replicate.
struct ReplicateFit {
    bool converged = false;
    bool fit_error = false;  // fit aborted (counts against the convergence rate)
    double loglik = std::numeric_limits<double>::quiet_NaN();
    double aic = std::numeric_limits<double>::quiet_NaN();
    double bic = std::numeric_limits<double>::quiet_NaN();
    RegressionCoefficients coefs;
    std::optional<Eigen::VectorXd> se;      // sqrt diag of covariance, free dims
    std::vector<double> survivor_probes;    // fitted S0 at the true baseline quantiles
};

struct NuPointStudy {
    double nu = 0.0;
    double censoring_rate = 0.0;
    double realized_censoring = 0.0;
    std::vector<std::vector<ReplicateFit>> samples;  // [spec][replicate]
};

struct StudyResult {
    ScenarioConfig scenario;
    std::vector<NuPointStudy> points;
};

/// Median / SD / mean-SE of one coefficient over converged replicates.
struct CoefficientSummary {
    Block block = Block::Tau;
    int index = 0;
    std::string label;
    bool is_free = true;
    double median = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();
    double mean_se = std::numeric_limits<double>::quiet_NaN();
    int n_used = 0;
};

struct CellSummary {
    double nu = 0.0;
    std::string spec_name;
    double convergence_rate = 0.0;
    std::vector<CoefficientSummary> coefficients;
};

struct ReplicationSummary {
    std::vector<CellSummary> cells;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Runs the full replication study: for each nu point, calibrates censoring,
/// simulates n_replicates datasets and fits every spec.  Deterministic for a
/// given seed regardless of thread count.
inline StudyResult run_study(const ScenarioConfig& scenario) {
    scenario.validate();
    StudyResult result;
    result.scenario = scenario;
    std::vector<double> grid = scenario.nu_grid;
    if (grid.empty()) grid = {scenario.true_coefs.nu[0]};

    for (std::size_t g = 0; g < grid.size(); ++g) {
        NuPointStudy point;
        point.nu = grid[g];
        point.censoring_rate =
            scenario.target_censoring == 0.0 ? 0.0 : calibrate_censoring(scenario, grid[g]);
        point.samples.assign(scenario.fit_specs.size(), {});
        for (auto& s : point.samples)
            s.resize(static_cast<std::size_t>(scenario.n_replicates));
        std::vector<double> censored_fraction(
            static_cast<std::size_t>(scenario.n_replicates), 0.0);

        // True baseline quantiles for the survivor probes.
        std::vector<double> probe_times;
        if (!scenario.survivor_probe_u.empty()) {
            Eigen::RowVectorXd zero_row(scenario.covariate_law.n_covariates());
            zero_row.setZero();
            if (std::isinf(grid[g])) {
                RegressionCoefficients truth = scenario.true_coefs;
                truth.nu.setZero();
                const ApgwParams base = subject_params(truth, zero_row);
                for (double u : scenario.survivor_probe_u) {
                    const double y = -std::log1p(-u);
                    probe_times.push_back(
                        std::pow(std::log1p(y / base.lambda), 1.0 / base.gamma) / base.phi);
                }
            } else {
                RegressionCoefficients truth = scenario.true_coefs;
                truth.nu[0] = grid[g];
                const ApgwParams base = subject_params(truth, zero_row);
                for (double u : scenario.survivor_probe_u)
                    probe_times.push_back(quantile(u, base));
            }
        }

        detail::parallel_for(
            scenario.n_replicates, scenario.n_threads, [&](int r) {
                const std::uint64_t stream = derive_stream(scenario.seed, g, static_cast<std::uint64_t>(r));
                const SurvivalDataset data =
                    generate_dataset(scenario, grid[g], point.censoring_rate, stream);
                double censored = 0.0;
                for (int i = 0; i < data.n(); ++i) censored += data.status[i] == 0 ? 1.0 : 0.0;
                censored_fraction[static_cast<std::size_t>(r)] = censored / data.n();
                for (std::size_t s = 0; s < scenario.fit_specs.size(); ++s) {
                    ReplicateFit rf;
                    try {
                        const FitResult f = fit(data, scenario.fit_specs[s], scenario.optimizer);
                        rf.converged = f.converged;
                        rf.loglik = f.loglik;
                        rf.aic = f.aic;
                        rf.bic = f.bic;
                        rf.coefs = f.coefs;
                        if (f.covariance)
                            rf.se = f.covariance->diagonal().cwiseMax(0.0).cwiseSqrt();
                        if (!probe_times.empty()) {
                            Eigen::RowVectorXd zero_row(scenario.covariate_law.n_covariates());
                            zero_row.setZero();
                            const ApgwParams fitted = subject_params(f.coefs, zero_row);
                            for (double t : probe_times)
                                rf.survivor_probes.push_back(survivor(t, fitted));
                        }
                    } catch (const Error&) {
                        rf.fit_error = true;
                    }
                    point.samples[s][static_cast<std::size_t>(r)] = std::move(rf);
                }
            });

        double realized = 0.0;
        for (double f : censored_fraction) realized += f;
        point.realized_censoring = realized / scenario.n_replicates;
        result.points.push_back(std::move(point));
    }
    return result;
}

/// Aggregates a study into the median/SD table layout.  Medians and SDs use
/// converged replicates only.
inline ReplicationSummary summarize(const StudyResult& study) {
    ReplicationSummary out;
    const auto& scenario = study.scenario;
    for (const auto& point : study.points) {
        for (std::size_t s = 0; s < scenario.fit_specs.size(); ++s) {
            const ModelSpec& spec = scenario.fit_specs[s];
            CellSummary cell;
            cell.nu = point.nu;
            cell.spec_name = spec.name();
            const auto& reps = point.samples[s];
            int n_converged = 0;
            for (const auto& r : reps) n_converged += (!r.fit_error && r.converged) ? 1 : 0;
            cell.convergence_rate =
                reps.empty() ? 0.0 : static_cast<double>(n_converged) / reps.size();
            const auto free = spec.free_entries();
            for (Block b : kAllBlocks) {
                for (int j = 0; j <= spec.n_covariates; ++j) {
                    CoefficientSummary cs;
                    cs.block = b;
                    cs.index = j;
                    cs.label = spec.entry_label(b, j);
                    cs.is_free = spec.is_free(b, j);
                    std::vector<double> values, ses;
                    int free_pos = -1;
                    if (cs.is_free) {
                        for (std::size_t k = 0; k < free.size(); ++k)
                            if (free[k] == std::make_pair(b, j)) free_pos = static_cast<int>(k);
                    }
                    for (const auto& r : reps) {
                        if (r.fit_error || !r.converged) continue;
                        values.push_back(r.coefs.block(b)[j]);
                        if (cs.is_free && r.se && free_pos >= 0)
                            ses.push_back((*r.se)[free_pos]);
                    }
                    cs.n_used = static_cast<int>(values.size());
                    cs.median = detail::median_of(values);
                    cs.sd = cs.is_free ? detail::sd_of(values) : 0.0;
                    if (!ses.empty()) {
                        double acc = 0.0;
                        for (double v : ses) acc += v;
                        cs.mean_se = acc / static_cast<double>(ses.size());
                    }
                    cell.coefficients.push_back(std::move(cs));
                }
            }
            out.cells.push_back(std::move(cell));
        }
    }
    return out;
}

/// The no-covariate study design: truth tau=0.8, beta=0.5, alpha=-0.3 with
/// nu varying over the grid; 30% exponential censoring; fits (i) both scales
/// free, (ii) beta frozen at its true value, (iii) beta frozen at zero.
inline ScenarioConfig nocov_study_design(std::vector<double> nu_grid, int n, int n_replicates,
                                         std::uint64_t seed) {
    ScenarioConfig sc;
    sc.n = n;
    sc.n_replicates = n_replicates;
    sc.seed = seed;
    sc.target_censoring = 0.30;
    sc.covariate_law.kind = CovariateLaw::Kind::None;
    sc.true_coefs = RegressionCoefficients(0);
    sc.true_coefs.tau[0] = 0.8;
    sc.true_coefs.beta[0] = 0.5;
    sc.true_coefs.alpha[0] = -0.3;
    sc.nu_grid = std::move(nu_grid);

    ModelSpec both;  // (i)
    both.n_covariates = 0;
    both.active = {Block::Tau, Block::Beta};
    both.allow_two_scales = true;
    ModelSpec beta_true;  // (ii)
    beta_true.n_covariates = 0;
    beta_true.active = {Block::Tau};
    beta_true.fixed_values[{Block::Beta, 0}] = 0.5;
    ModelSpec beta_zero;  // (iii)
    beta_zero.n_covariates = 0;
    beta_zero.active = {Block::Tau};
    sc.fit_specs = {both, beta_true, beta_zero};
    return sc;
}

/// The single-binary-covariate study design: truth M(tau,alpha) with
/// tau=(0.8,0.6), beta=0, alpha=(0.2,-0.5), X ~ Bernoulli(0.5), 30%
/// censoring; fits M(tau,beta,alpha), M(tau,alpha), M(beta,alpha).
inline ScenarioConfig covariate_study_design(std::vector<double> nu_grid, int n,
                                             int n_replicates, std::uint64_t seed) {
    ScenarioConfig sc;
    sc.n = n;
    sc.n_replicates = n_replicates;
    sc.seed = seed;
    sc.target_censoring = 0.30;
    sc.covariate_law.kind = CovariateLaw::Kind::Bernoulli;
    sc.covariate_law.prob = 0.5;
    sc.true_coefs = RegressionCoefficients(1);
    sc.true_coefs.tau << 0.8, 0.6;
    sc.true_coefs.alpha << 0.2, -0.5;
    sc.nu_grid = std::move(nu_grid);

    auto spec_with = [&](std::set<Block> active, bool two_scales) {
        ModelSpec m;
        m.n_covariates = 1;
        m.covariate_names = {"x1"};
        m.active = std::move(active);
        m.allow_two_scales = two_scales;
        return m;
    };
    sc.fit_specs = {spec_with({Block::Tau, Block::Beta, Block::Alpha}, true),
                    spec_with({Block::Tau, Block::Alpha}, false),
                    spec_with({Block::Beta, Block::Alpha}, false)};
    return sc;
}

}  // namespace apgw
