// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.  Runs the replication studies at reduced (desk-scale)
// replicate counts with fixed seeds and checks every threshold in code.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "apgw/apgw.hpp"
#include "oracles.hpp"

using namespace apgw;

namespace {

struct Criterion {
    int id = 0;
    std::string title;
    bool pass = true;
    std::vector<std::string> details;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        details.push_back(std::string(ok ? "  ok   " : "  BAD  ") + what);
    }

    void check_close(double value, double target, double tol, const std::string& what) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s: %.4f (target %.4f +/- %.4f)", what.c_str(),
                      value, target, tol);
        check(std::abs(value - target) <= tol, buf);
    }

    void check_in(double value, double lo, double hi, const std::string& what) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s: %.4f (required [%.4f, %.4f])", what.c_str(),
                      value, lo, hi);
        check(value >= lo && value <= hi, buf);
    }
};

std::vector<Criterion> g_criteria;

Criterion& criterion(int id, const std::string& title) {
    Criterion c;
    c.id = id;
    c.title = title;
    g_criteria.push_back(std::move(c));
    return g_criteria.back();
}

const CoefficientSummary& coef_of(const CellSummary& cell, Block b, int idx) {
    for (const auto& c : cell.coefficients)
        if (c.block == b && c.index == idx) return c;
    throw Error("coefficient summary missing");
}

const CellSummary& cell_of(const ReplicationSummary& summary, double nu,
                           const std::string& spec_name) {
    for (const auto& cell : summary.cells)
        if (cell.spec_name == spec_name && std::abs(cell.nu - nu) < 1e-12) return cell;
    throw Error("summary cell missing for " + spec_name);
}

std::vector<double> collect(const NuPointStudy& point, std::size_t spec_idx, Block b, int idx,
                            bool converged_only) {
    std::vector<double> out;
    for (const auto& rep : point.samples[spec_idx]) {
        if (rep.fit_error) continue;
        if (converged_only && !rep.converged) continue;
        out.push_back(rep.coefs.block(b)[idx]);
    }
    return out;
}

// ---------------------------------------------------------------- criteria 1+2

void criteria_nocov_study(int n_replicates) {
    ScenarioConfig sc = nocov_study_design({0.0, 0.69}, 1000, n_replicates, 1101);
    ModelSpec model_ii = sc.fit_specs[1];
    ModelSpec model_iii = sc.fit_specs[2];
    sc.fit_specs = {model_ii, model_iii};
    const StudyResult study = run_study(sc);
    const ReplicationSummary summary = summarize(study);

    // cells are ordered (nu outer, spec inner): [0](ii at 0) [1](iii at 0)
    // [2](ii at 0.69) [3](iii at 0.69)
    const CellSummary& ii0 = summary.cells[0];
    const CellSummary& iii0 = summary.cells[1];
    const CellSummary& ii69 = summary.cells[2];

    {
        Criterion& c = criterion(
            1, "no-covariate study, beta frozen at truth: medians and spread");
        c.check_close(coef_of(ii0, Block::Tau, 0).median, 0.81, 0.05, "nu=0 median tau");
        c.check_close(coef_of(ii0, Block::Alpha, 0).median, -0.30, 0.03, "nu=0 median alpha");
        c.check_close(coef_of(ii0, Block::Nu, 0).median, 0.00, 0.05, "nu=0 median nu");
        c.check_close(coef_of(ii0, Block::Tau, 0).sd, 0.15, 0.05, "nu=0 SD of tau");
        c.check_close(coef_of(ii69, Block::Tau, 0).median, 0.79, 0.05, "nu=0.69 median tau");
        c.check_close(coef_of(ii69, Block::Alpha, 0).median, -0.30, 0.03,
                      "nu=0.69 median alpha");
        c.check_close(coef_of(ii69, Block::Nu, 0).median, 0.71, 0.10, "nu=0.69 median nu");
        // reported SEs track the replicate spread
        c.check_close(coef_of(ii0, Block::Tau, 0).mean_se, 0.15, 0.03,
                      "nu=0 mean reported SE of tau");
        c.check(coef_of(ii0, Block::Beta, 0).median == 0.5, "beta frozen at 0.5 exactly");
        char buf[128];
        std::snprintf(buf, sizeof(buf), "convergence rate %.3f", ii0.convergence_rate);
        c.check(ii0.convergence_rate > 0.95, buf);
    }

    {
        Criterion& c = criterion(2, "no-covariate study, beta frozen at zero");
        c.check(coef_of(iii0, Block::Beta, 0).median == 0.0, "beta frozen at 0 exactly");
        c.check_in(coef_of(iii0, Block::Tau, 0).median, 1.47, 1.57, "nu=0 median tau");
        c.check_close(coef_of(iii0, Block::Alpha, 0).median, -0.29, 0.03, "nu=0 median alpha");
    }
}

// ------------------------------------------------------------------ criterion 3

void criterion_collinearity(int n_replicates) {
    Criterion& c = criterion(
        3, "near-collinearity of the two scale blocks when both are estimated");
    ScenarioConfig sc = nocov_study_design({0.41}, 1000, n_replicates, 1103);
    // fit (i) both scales and (ii) beta frozen at truth
    sc.fit_specs = {sc.fit_specs[0], sc.fit_specs[1]};
    sc.optimizer.max_iterations = 400;
    const StudyResult study = run_study(sc);
    const auto& point = study.points[0];

    // ridge fits rarely meet the strict gradient test; the estimates are
    // still the returned optima, so use every fit that ran
    const auto tau_i = collect(point, 0, Block::Tau, 0, false);
    const auto beta_i = collect(point, 0, Block::Beta, 0, false);
    const auto tau_ii = collect(point, 1, Block::Tau, 0, true);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "usable model-(i) replicates: %zu of %d", tau_i.size(),
                  n_replicates);
    c.check(static_cast<int>(tau_i.size()) >= n_replicates * 9 / 10, buf);

    const double corr = oracles::correlation(tau_i, beta_i);
    std::snprintf(buf, sizeof(buf), "|corr(tau0, beta0)| = %.4f (required > 0.95)",
                  std::abs(corr));
    c.check(std::abs(corr) > 0.95, buf);

    const double sd_tau_i = oracles::sample_sd(tau_i);
    const double sd_beta_i = oracles::sample_sd(beta_i);
    const double sd_tau_ii = oracles::sample_sd(tau_ii);
    std::snprintf(buf, sizeof(buf), "SD inflation tau: %.3f vs %.3f (need > 5x)", sd_tau_i,
                  sd_tau_ii);
    c.check(sd_tau_i > 5.0 * sd_tau_ii, buf);
    std::snprintf(buf, sizeof(buf), "SD inflation beta: %.3f vs %.3f (need > 5x)", sd_beta_i,
                  sd_tau_ii);
    c.check(sd_beta_i > 5.0 * sd_tau_ii, buf);
}

// -------------------------------------------------------------- criteria 4+5

void criteria_covariate_study(int n_replicates) {
    const std::vector<double> nu_grid = {0.0, 0.69, 1.10};
    ScenarioConfig big = covariate_study_design(nu_grid, 1000, n_replicates, 1104);
    big.fit_specs = {big.fit_specs[1]};  // M(tau,alpha) only
    const StudyResult study_big = run_study(big);
    const ReplicationSummary sum_big = summarize(study_big);

    {
        Criterion& c = criterion(4, "single-covariate study: M(tau,alpha) medians");
        for (double nu : nu_grid) {
            const CellSummary& cell = cell_of(sum_big, nu, "M(tau,alpha)");
            const std::string tag = "nu=" + std::to_string(nu).substr(0, 4);
            c.check_close(coef_of(cell, Block::Tau, 0).median, 0.80, 0.05, tag + " tau0");
            c.check_close(coef_of(cell, Block::Tau, 1).median, 0.60, 0.05, tag + " tau1");
            c.check_close(coef_of(cell, Block::Alpha, 0).median, 0.20, 0.05, tag + " alpha0");
            c.check_close(coef_of(cell, Block::Alpha, 1).median, -0.50, 0.05, tag + " alpha1");
            c.check_close(coef_of(cell, Block::Nu, 0).median, nu, 0.10, tag + " nu0");
        }
    }

    {
        Criterion& c = criterion(5, "small-sample rerun inflates every coefficient spread");
        ScenarioConfig small = covariate_study_design(nu_grid, 100, n_replicates, 1105);
        small.fit_specs = {small.fit_specs[1]};
        const StudyResult study_small = run_study(small);
        const ReplicationSummary sum_small = summarize(study_small);
        for (double nu : nu_grid) {
            const CellSummary& cb = cell_of(sum_big, nu, "M(tau,alpha)");
            const CellSummary& cs = cell_of(sum_small, nu, "M(tau,alpha)");
            for (const auto& [block, idx] :
                 std::vector<std::pair<Block, int>>{{Block::Tau, 0},
                                                    {Block::Tau, 1},
                                                    {Block::Alpha, 0},
                                                    {Block::Alpha, 1},
                                                    {Block::Nu, 0}}) {
                const double sd_small = coef_of(cs, block, idx).sd;
                const double sd_big = coef_of(cb, block, idx).sd;
                char buf[160];
                std::snprintf(buf, sizeof(buf), "nu=%.2f %s%d SD: n=100 %.3f vs n=1000 %.3f",
                              nu, to_string(block), idx, sd_small, sd_big);
                c.check(sd_small >= 2.0 * sd_big, buf);
            }
        }
    }
}

// ------------------------------------------------------------------ criterion 6

void criterion_weibull_equivalence() {
    Criterion& c = criterion(6, "Weibull case: tau and beta scale fits are equivalent");
    Rng rng(1106);
    const ApgwParams truth{std::exp(0.5), 1.0, std::exp(0.25), 1.0};
    SurvivalDataset data;
    const int n = 1000;
    data.times.resize(n);
    data.status.resize(n);
    data.covariates.resize(n, 0);
    for (int i = 0; i < n; ++i) {
        const double t = sample_lifetime(truth, rng);
        const double censor = rng.exponential(0.15);
        data.times[i] = std::min(t, censor);
        data.status[i] = t <= censor ? 1 : 0;
    }
    OptimizerConfig config;
    config.seed = 6;
    config.gradient_tolerance = 1e-8;

    ModelSpec tau_spec;
    tau_spec.n_covariates = 0;
    tau_spec.active = {Block::Tau};
    tau_spec.fixed_values[{Block::Nu, 0}] = std::log(2.0);
    ModelSpec beta_spec;
    beta_spec.n_covariates = 0;
    beta_spec.active = {Block::Beta};
    beta_spec.fixed_values[{Block::Nu, 0}] = std::log(2.0);

    const FitResult ft = fit(data, tau_spec, config);
    const FitResult fb = fit(data, beta_spec, config);
    c.check(ft.converged && fb.converged, "both fits converged");
    char buf[160];
    std::snprintf(buf, sizeof(buf), "|loglik difference| = %.3e (required <= 1e-6)",
                  std::abs(ft.loglik - fb.loglik));
    c.check(std::abs(ft.loglik - fb.loglik) <= 1e-6, buf);
    const double inv_tau = std::exp(std::exp(ft.coefs.alpha[0]) * ft.coefs.tau[0]);
    const double inv_beta = std::exp(fb.coefs.beta[0]);
    std::snprintf(buf, sizeof(buf),
                  "lambda*phi^gamma: %.8f vs %.8f (rel diff %.3e, required <= 1e-6)", inv_tau,
                  inv_beta, std::abs(inv_tau - inv_beta) / inv_beta);
    c.check(std::abs(inv_tau - inv_beta) <= 1e-6 * inv_beta, buf);
}

// ------------------------------------------------------------------ criterion 7

ApgwParams random_params(Rng& rng) {
    return {std::exp(-2.0 + 4.0 * rng.uniform()), std::exp(-2.0 + 4.0 * rng.uniform()),
            0.1 + 4.9 * rng.uniform(), -0.9 + 20.9 * rng.uniform()};
}

void criterion_properties() {
    Criterion& c = criterion(7, "property suites at their stated tolerances");

    {  // score vs finite differences, 200 random cases incl. cure region
        Rng rng(1107);
        double worst = 0.0;
        const std::vector<std::string> lattice = {"M(tau)",       "M(beta)",     "M(tau,alpha)",
                                                  "M(beta,alpha)", "M(beta,nu)", "M(tau,nu)",
                                                  "M(tau,beta,alpha,nu)"};
        for (int rep = 0; rep < 200; ++rep) {
            const int p = rep % 3;
            SurvivalDataset data;
            const int n = 30;
            data.times.resize(n);
            data.status.resize(n);
            data.covariates.resize(n, p);
            for (int i = 0; i < n; ++i) {
                data.times[i] = 0.05 + 3.0 * rng.uniform();
                data.status[i] = rng.uniform() < 0.25 ? 0 : 1;
                for (int j = 0; j < p; ++j) data.covariates(i, j) = rng.normal();
            }
            ModelSpec spec = parse_model_spec(lattice[rep % lattice.size()], p, {}, true);
            Eigen::VectorXd theta(spec.n_free());
            for (int j = 0; j < theta.size(); ++j) theta[j] = 0.3 * rng.normal();
            if (rep % 4 == 0) theta[theta.size() - 1] = -0.7 - 0.5 * rng.uniform();
            const RegressionCoefficients coefs = unpack(theta, spec);
            const Eigen::VectorXd analytic = score(coefs, spec, data);
            std::vector<double> x(theta.data(), theta.data() + theta.size());
            const auto fd = oracles::fd_gradient(
                [&](const std::vector<double>& v) {
                    Eigen::VectorXd th = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
                    return log_likelihood(unpack(th, spec), spec, data);
                },
                x, 1e-6);
            for (int j = 0; j < analytic.size(); ++j) {
                const double rel = std::abs(analytic[j] - fd[static_cast<std::size_t>(j)]) /
                                   std::max(1.0, std::abs(analytic[j]));
                worst = std::max(worst, rel);
            }
        }
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "score vs finite differences: worst rel err %.2e (required < 1e-5)",
                      worst);
        c.check(worst < 1e-5, buf);
    }

    {  // quantile-survivor roundtrip
        Rng rng(1108);
        double worst = 0.0;
        for (int rep = 0; rep < 300; ++rep) {
            ApgwParams p = random_params(rng);
            if (p.is_cure()) p = {p.phi, p.lambda, p.gamma, p.kappa + 1.0};
            for (int i = 1; i < 100; i += 2) {
                const double u = i / 100.0;
                worst = std::max(worst, std::abs(1.0 - survivor(quantile(u, p), p) - u));
            }
        }
        char buf[128];
        std::snprintf(buf, sizeof(buf), "quantile roundtrip: worst |err| %.2e (required <= 1e-8)",
                      worst);
        c.check(worst <= 1e-8, buf);
    }

    {  // Table 2 special cases
        bool ok = true;
        for (double t : {0.2, 0.5, 0.9, 1.4, 2.1, 3.3}) {
            for (double gamma : {0.5, 1.0, 1.7, 2.6}) {
                const double tg = std::pow(t, gamma);
                ok = ok && std::abs(cum_hazard(t, {1, 1, gamma, 1}) - tg) < 1e-12;
                ok = ok &&
                     std::abs(cum_hazard(t, {1, 1, gamma, 1e-8}) - std::log1p(tg)) < 1e-6;
                ok = ok &&
                     std::abs(cum_hazard(t, {1, 1, gamma, 2}) - (tg + tg * tg / 6.0)) < 1e-10;
                if (tg <= 3.5)
                    ok = ok && std::abs(cum_hazard(t, {1, 1, gamma, 1e4}) - std::expm1(tg)) <
                                   1e-3 * std::expm1(tg);
            }
        }
        c.check(ok, "special-case agreement (power, log-logistic, linear-type, Gompertz rows)");
    }

    {  // density normalization, including the cure-mass variant
        const double plain = oracles::integrate_half_line(
            [&](double t) { return density(t, {1, 1, 1.3, 0.5}); });
        const ApgwParams cure{1, 1, 2, -0.5};
        const double defective =
            oracles::integrate_half_line([&](double t) { return density(t, cure); });
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "density mass: %.8f (to 1), %.8f (to 1-cure %.8f), tol 1e-6", plain,
                      defective, 1.0 - cure_probability(cure));
        c.check(std::abs(plain - 1.0) < 1e-6 &&
                    std::abs(defective - (1.0 - cure_probability(cure))) < 1e-6,
                buf);
    }

    {  // shape classification vs numeric hazard profile, all taxonomy rows
        bool ok = true;
        const std::vector<ApgwParams> rows = {{1, 1, 1, 1},
                                              {1, 1, 0.7, 0.9},
                                              {1, 1, 0.5, 4},
                                              {1, 1, 2, 0.25},
                                              {1, 1, 1.4, 1.1}};
        for (const auto& p : rows) {
            const auto shape = classify_shape(p);
            int sign_changes = 0, last_sign = 0, first_sign = 0;
            bool any_up = false, any_down = false;
            double prev = hazard(1e-4, p);
            for (int i = 1; i < 10000; ++i) {
                const double t = std::pow(10.0, -4.0 + 8.0 * i / 9999.0);
                const double h = hazard(t, p);
                const int sign =
                    h - prev > h * 1e-13 ? 1 : (h - prev < -h * 1e-13 ? -1 : 0);
                prev = h;
                if (sign == 0) continue;
                any_up |= sign > 0;
                any_down |= sign < 0;
                if (first_sign == 0) first_sign = sign;
                if (last_sign != 0 && sign != last_sign) ++sign_changes;
                last_sign = sign;
            }
            switch (shape.tag) {
                case HazardShapeTag::Constant: ok = ok && !any_up && !any_down; break;
                case HazardShapeTag::Decreasing: ok = ok && any_down && !any_up; break;
                case HazardShapeTag::Increasing: ok = ok && any_up && !any_down; break;
                case HazardShapeTag::DownThenUp:
                    ok = ok && sign_changes == 1 && first_sign == -1;
                    break;
                case HazardShapeTag::UpThenDown:
                    ok = ok && sign_changes == 1 && first_sign == 1;
                    break;
            }
        }
        c.check(ok, "shape tags match the numeric hazard sign pattern on the log grid");
    }

    {  // hazard/quantile ratio closed forms vs first principles
        ModelSpec spec = parse_model_spec("M(tau,beta,alpha)", 1, {}, true);
        RegressionCoefficients coefs(1);
        coefs.tau << 0.4, 0.0;
        coefs.beta << -0.1, 0.3;
        coefs.alpha << 0.15, -0.35;
        coefs.nu << 0.41, 0.0;
        FitResult f;
        f.spec = spec;
        f.coefs = coefs;
        f.theta = pack(coefs, spec);
        Eigen::RowVectorXd base(1), x1(1), x0(1);
        base << 0.0;
        x1 << 1.0;
        x0 << 0.0;
        const ApgwParams p1 = subject_params(coefs, x1);
        const ApgwParams p0 = subject_params(coefs, x0);
        double worst = 0.0;
        std::vector<double> grid;
        for (int i = 1; i <= 60; ++i) grid.push_back(0.08 * i);
        const auto hr = hazard_ratio_curve(f, 0, base, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double direct = hazard(grid[i], p1) / hazard(grid[i], p0);
            worst = std::max(worst, std::abs(hr[i] - direct) / direct);
        }
        ModelSpec tspec = parse_model_spec("M(tau,alpha)", 1);
        RegressionCoefficients tc(1);
        tc.tau << 0.4, -0.3;
        tc.alpha << 0.15, -0.35;
        tc.nu << 0.22, 0.0;
        FitResult ftau;
        ftau.spec = tspec;
        ftau.coefs = tc;
        ftau.theta = pack(tc, tspec);
        const ApgwParams q1 = subject_params(tc, x1);
        const ApgwParams q0 = subject_params(tc, x0);
        std::vector<double> ugrid;
        for (int i = 1; i <= 60; ++i) ugrid.push_back(i / 62.0);
        const auto qr = quantile_ratio_curve(ftau, 0, base, ugrid);
        for (std::size_t i = 0; i < ugrid.size(); ++i) {
            const double direct = quantile(ugrid[i], q1) / quantile(ugrid[i], q0);
            worst = std::max(worst, std::abs(qr[i] - direct) / direct);
        }
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "ratio curves vs first principles: worst rel err %.2e (required <= 1e-10)",
                      worst);
        c.check(worst <= 1e-10, buf);
    }

    {  // Box-Cox transformation identity
        bool ok = true;
        for (double t : {0.3, 1.0, 1.7, 6.0})
            for (double gamma : {0.5, 1.4, 3.0})
                for (double kappa : {0.2, 0.8, 2.0}) {
                    const double y = std::exp(gamma * std::log(t));
                    const double w = std::expm1(kappa * std::log1p(y));
                    const double lhs = pgw_cum_hazard(t, gamma, kappa);
                    ok = ok && std::abs(lhs - w) <= 2.0 * std::abs(w) * 1e-16;
                }
        c.check(ok, "transformation identity H_N(t) = w(t^gamma) holds exactly");
    }
}

// ------------------------------------------------------------------ criterion 8

void criterion_substitutes(int compare_replicates, int coverage_replicates) {
    Criterion& c = criterion(
        8, "substitute studies: model ranking on 5-arm data and cure-CI coverage");

    {  // 5-arm compare: truth M(tau,alpha) must win the AIC ranking >= 90%.
        // Strong arm effects, a baseline well into the light-tailed region
        // and mild censoring keep the vertical-scale rival clearly behind.
        const int p = 4;
        RegressionCoefficients truth(p);
        truth.tau << 0.8, 1.2, -1.0, 0.7, -0.5;
        truth.alpha << 0.2, -0.7, 0.5, -0.45, 0.65;
        truth.nu[0] = 2.3;
        const int n = 2000;

        auto draw_arm = [&](Rng& rng, Eigen::RowVectorXd& x) {
            x.setZero();
            const int arm = static_cast<int>(rng.uniform() * 5.0);
            if (arm > 0) x[arm - 1] = 1.0;
        };
        const double rate = calibrate_censoring_rate(
            0.10,
            [&](Rng& rng) {
                Eigen::RowVectorXd x(p);
                draw_arm(rng, x);
                return sample_lifetime(subject_params(truth, x), rng);
            },
            derive_stream(1108, 1, 1));

        std::vector<std::string> lattice = {"M(beta)",      "M(tau)",     "M(beta,alpha)",
                                            "M(tau,alpha)", "M(beta,nu)", "M(tau,nu)"};
        std::vector<ModelSpec> specs;
        for (const auto& name : lattice) specs.push_back(parse_model_spec(name, p));
        const std::size_t truth_index = 3;

        std::vector<int> win(static_cast<std::size_t>(compare_replicates), 0);
        std::vector<int> usable(static_cast<std::size_t>(compare_replicates), 0);
        detail::parallel_for(compare_replicates, 0, [&](int r) {
            Rng rng(derive_stream(1109, 2, static_cast<std::uint64_t>(r)));
            SurvivalDataset data;
            data.times.resize(n);
            data.status.resize(n);
            data.covariates.resize(n, p);
            data.names = {"arm2", "arm3", "arm4", "arm5"};
            Eigen::RowVectorXd x(p);
            for (int i = 0; i < n; ++i) {
                draw_arm(rng, x);
                data.covariates.row(i) = x;
                const double t = sample_lifetime(subject_params(truth, x), rng);
                const double censor = rng.exponential(rate);
                data.times[i] = std::min(t, censor);
                data.status[i] = t <= censor ? 1 : 0;
            }
            OptimizerConfig config;
            config.seed = derive_stream(1110, 3, static_cast<std::uint64_t>(r));
            double best_aic = std::numeric_limits<double>::infinity();
            std::size_t best_idx = 0;
            bool all_ok = true;
            for (std::size_t s = 0; s < specs.size(); ++s) {
                try {
                    const FitResult f = fit(data, specs[s], config);
                    if (f.aic < best_aic) {
                        best_aic = f.aic;
                        best_idx = s;
                    }
                } catch (const Error&) {
                    all_ok = false;
                }
            }
            usable[static_cast<std::size_t>(r)] = all_ok ? 1 : 0;
            win[static_cast<std::size_t>(r)] = (all_ok && best_idx == truth_index) ? 1 : 0;
        });
        int wins = 0, total = 0;
        for (int r = 0; r < compare_replicates; ++r) {
            total += usable[static_cast<std::size_t>(r)];
            wins += win[static_cast<std::size_t>(r)];
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "truth-structure model lowest AIC in %d of %d runs (%.1f%%, need >= 90%%)",
                      wins, total, 100.0 * wins / std::max(1, total));
        c.check(total >= compare_replicates * 9 / 10 &&
                    wins >= static_cast<int>(std::ceil(0.9 * total)),
                buf);
    }

    {  // cure-proportion delta-method coverage
        RegressionCoefficients truth(0);
        truth.alpha[0] = 0.3;
        truth.nu[0] = std::log(0.5);  // kappa = -0.5, lambda = 1
        const double p_true = std::exp(-1.0);
        const int n = 1000;
        const double rate = calibrate_censoring_rate(
            0.45,
            [&](Rng& rng) {
                Eigen::RowVectorXd x(0);
                return sample_lifetime(subject_params(truth, x), rng);
            },
            derive_stream(1111, 4, 4));
        ModelSpec cure_spec = parse_model_spec("M(beta)", 0);

        std::vector<int> covered(static_cast<std::size_t>(coverage_replicates), -1);
        detail::parallel_for(coverage_replicates, 0, [&](int r) {
            Rng rng(derive_stream(1112, 5, static_cast<std::uint64_t>(r)));
            SurvivalDataset data;
            data.times.resize(n);
            data.status.resize(n);
            data.covariates.resize(n, 0);
            Eigen::RowVectorXd none(0);
            const ApgwParams params = subject_params(truth, none);
            for (int i = 0; i < n; ++i) {
                const double t = sample_lifetime(params, rng);
                const double censor = rng.exponential(rate);
                data.times[i] = std::min(t, censor);
                data.status[i] = t <= censor ? 1 : 0;
            }
            OptimizerConfig config;
            config.seed = derive_stream(1113, 6, static_cast<std::uint64_t>(r));
            try {
                const FitResult f = fit(data, cure_spec, config);
                if (!f.covariance) return;
                const ApgwParams fitted = subject_params(f.coefs, none);
                if (!(fitted.kappa < 0.0)) {
                    covered[static_cast<std::size_t>(r)] = 0;  // missed the cure region
                    return;
                }
                const CureReport report = cure_report(f, {none});
                covered[static_cast<std::size_t>(r)] =
                    (p_true >= report.profiles[0].lower && p_true <= report.profiles[0].upper)
                        ? 1
                        : 0;
            } catch (const Error&) {
            }
        });
        int hits = 0, total = 0;
        for (int v : covered) {
            if (v < 0) continue;
            ++total;
            hits += v;
        }
        const double coverage = static_cast<double>(hits) / std::max(1, total);
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "cure CI coverage %.4f over %d replicates (required in [0.93, 0.97])",
                      coverage, total);
        c.check(total >= coverage_replicates * 9 / 10 && coverage >= 0.93 && coverage <= 0.97,
                buf);
    }
}

}  // namespace

int main() {
    try {
        criteria_nocov_study(200);
        criterion_collinearity(100);
        criteria_covariate_study(200);
        criterion_weibull_equivalence();
        criterion_properties();
        criterion_substitutes(100, 500);
    } catch (const std::exception& e) {
        std::printf("FATAL: acceptance run aborted: %s\n", e.what());
        return 2;
    }

    int failures = 0;
    for (const auto& c : g_criteria) {
        std::printf("%s criterion %d: %s\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str());
        for (const auto& d : c.details) std::printf("%s\n", d.c_str());
        failures += c.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(g_criteria.size()) - failures,
                g_criteria.size());
    return failures == 0 ? 0 : 1;
}
