#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "apgw/digest.hpp"
#include "apgw/errors.hpp"
#include "apgw/likelihood.hpp"
#include "apgw/model.hpp"
#include "apgw/rng.hpp"

// Maximum-likelihood search over the free coefficients: BFGS with Armijo
// backtracking on -l using the analytic score, multi-start from a Weibull
// centre, observed-information covariance from finite differences of the
// score.

namespace apgw {

struct OptimizerConfig {
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;  // max-norm of the score
    double step_tolerance = 1e-10;     // relative change of l between accepted steps
    int n_starts = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
        if (!(gradient_tolerance > 0.0)) throw ConfigError("gradient_tolerance must be positive");
        if (!(step_tolerance > 0.0)) throw ConfigError("step_tolerance must be positive");
        if (n_starts < 1) throw ConfigError("n_starts must be >= 1");
    }
};

struct FitResult {
    RegressionCoefficients coefs;
    ModelSpec spec;
    Eigen::VectorXd theta;  // free coefficients at the optimum (pack order)
    double loglik = -std::numeric_limits<double>::infinity();
    std::optional<Eigen::MatrixXd> covariance;  // inverse observed information, when PD
    bool converged = false;
    int n_iter = 0;
    std::optional<std::string> condition_warning;
    double aic = 0.0;
    double bic = 0.0;
    int n_obs = 0;
    std::uint64_t data_digest = 0;

    int dim() const { return static_cast<int>(theta.size()); }
};

namespace detail {

struct BfgsOutcome {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();  // minimised -l
    Eigen::VectorXd grad;
    bool grad_converged = false;
    int iterations = 0;
};

// Minimises f with analytic gradient.  eval(x, grad_out) returns f(x) and
// fills grad_out; it must return +inf (and may leave grad_out untouched) at
// infeasible points.  accepted_values, when given, records f after each
// accepted step (monotone by construction of the Armijo test).
inline BfgsOutcome minimize_bfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>& eval,
    const Eigen::VectorXd& x0, const OptimizerConfig& config,
    std::vector<double>* accepted_values = nullptr) {
    constexpr double c1 = 1e-4;
    const int n = static_cast<int>(x0.size());
    BfgsOutcome out;
    out.x = x0;
    out.grad.resize(n);
    out.value = eval(out.x, &out.grad);
    if (!std::isfinite(out.value)) return out;
    if (accepted_values) accepted_values->push_back(out.value);

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    int tiny_steps = 0;    // consecutive steps below step_tolerance
    int polish_rounds = 0; // quasi-Newton steps taken past the f-noise floor

    // Past the point where objective differences drown in evaluation noise,
    // the analytic score is still resolvable: step on -H g directly while it
    // strictly shrinks the score norm.  Updates state and returns true when a
    // step was taken.
    auto polish = [&]() -> bool {
        if (polish_rounds >= 8) return false;
        ++polish_rounds;
        const Eigen::VectorXd step = -(H * out.grad);
        Eigen::VectorXd g_try(n);
        Eigen::VectorXd x_try = out.x + step;
        const double f_try = eval(x_try, &g_try);
        if (!std::isfinite(f_try) || !g_try.allFinite() ||
            g_try.lpNorm<Eigen::Infinity>() >= out.grad.lpNorm<Eigen::Infinity>())
            return false;
        const Eigen::VectorXd y = g_try - out.grad;
        const double ys = y.dot(step);
        if (ys > 1e-12 * y.norm() * step.norm()) {
            const double rho = 1.0 / ys;
            const Eigen::MatrixXd A =
                Eigen::MatrixXd::Identity(n, n) - rho * step * y.transpose();
            H = A * H * A.transpose() + rho * step * step.transpose();
        }
        out.x = std::move(x_try);
        out.value = f_try;
        out.grad = g_try;
        return true;
    };

    for (int it = 0; it < config.max_iterations; ++it) {
        out.iterations = it;
        if (out.grad.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) {
            out.grad_converged = true;
            return out;
        }
        Eigen::VectorXd p = -(H * out.grad);
        double gtp = out.grad.dot(p);
        if (!(gtp < 0.0)) {  // not a descent direction: reset curvature
            H.setIdentity();
            p = -out.grad;
            gtp = out.grad.dot(p);
            if (!(gtp < 0.0)) return out;  // gradient degenerate
        }
        double alpha = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new, g_new(n);
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = out.x + alpha * p;
            f_new = eval(x_new, nullptr);
            if (std::isfinite(f_new) && f_new <= out.value + c1 * alpha * gtp) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (polish()) {
                out.iterations = it + 1;
                continue;
            }
            out.grad_converged =
                out.grad.lpNorm<Eigen::Infinity>() < config.gradient_tolerance;
            return out;
        }
        const double f_eval = eval(x_new, &g_new);
        if (!std::isfinite(f_eval) || !g_new.allFinite()) return out;
        const Eigen::VectorXd s = x_new - out.x;
        const Eigen::VectorXd y = g_new - out.grad;
        const double rel_change =
            std::abs(out.value - f_new) / std::max(1.0, std::abs(f_new));
        out.x = std::move(x_new);
        out.value = f_new;
        out.grad = g_new;
        if (accepted_values) accepted_values->push_back(out.value);
        // Stop on stalled objective only after three consecutive tiny steps;
        // superlinear convergence reaches the gradient test first on regular
        // problems, while ridge/flat fits still terminate.
        tiny_steps = rel_change < config.step_tolerance ? tiny_steps + 1 : 0;
        if (tiny_steps >= 3) {
            out.iterations = it + 1;
            if (out.grad.lpNorm<Eigen::Infinity>() >= config.gradient_tolerance && polish()) {
                tiny_steps = 0;
                continue;
            }
            out.grad_converged =
                out.grad.lpNorm<Eigen::Infinity>() < config.gradient_tolerance;
            return out;
        }
        const double ys = y.dot(s);
        if (ys > 1e-12 * y.norm() * s.norm()) {
            const double rho = 1.0 / ys;
            const Eigen::MatrixXd A =
                Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
            H = A * H * A.transpose() + rho * s * s.transpose();
        } else {
            H.setIdentity();
        }
        out.iterations = it + 1;
    }
    out.grad_converged = out.grad.lpNorm<Eigen::Infinity>() < config.gradient_tolerance;
    return out;
}

// Start 0 is the Weibull centre (all coefficients zero, nu0 = log 2);
// start s >= 1 perturbs every free entry by N(0, 0.5^2) from the stream
// seed ^ s.
inline Eigen::VectorXd start_point(const ModelSpec& spec, const OptimizerConfig& config,
                                   int start_index) {
    RegressionCoefficients base(spec.n_covariates);
    base.nu[0] = std::log(2.0);
    Eigen::VectorXd theta = pack(base, spec);
    if (start_index > 0) {
        Rng rng(config.seed ^ static_cast<std::uint64_t>(start_index));
        for (int j = 0; j < theta.size(); ++j) theta[j] += 0.5 * rng.normal();
    }
    return theta;
}

}  // namespace detail

/// Maximises the censored log-likelihood over the spec's free coefficients.
/// Returns the best of n_starts runs; deterministic given the seed.
inline FitResult fit(const SurvivalDataset& data, const ModelSpec& spec,
                     const OptimizerConfig& config = {}) {
    config.validate();
    spec.validate();
    data.validate();
    if (data.n() == 0) throw DataError("cannot fit an empty dataset");
    if (data.p() != spec.n_covariates)
        throw DimensionMismatch("dataset has " + std::to_string(data.p()) +
                                " covariates but the model spec declares " +
                                std::to_string(spec.n_covariates));

    const auto entries = spec.free_entries();
    const int k = static_cast<int>(entries.size());

    FitResult result;
    result.spec = spec;
    result.n_obs = data.n();
    result.data_digest = dataset_digest(data);

    auto eval = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) -> double {
        const RegressionCoefficients coefs = unpack(theta, spec);
        if (grad == nullptr) {
            const auto st = detail::try_log_likelihood(data, coefs);
            return st.ok ? -st.loglik : std::numeric_limits<double>::infinity();
        }
        Eigen::VectorXd g;
        const auto st = detail::try_score(data, coefs, entries, g);
        if (!st.ok) return std::numeric_limits<double>::infinity();
        *grad = -g;
        return -st.loglik;
    };

    if (k == 0) {  // everything frozen: just evaluate
        result.theta.resize(0);
        result.coefs = unpack(result.theta, spec);
        result.loglik = log_likelihood(result.coefs, spec, data);
        result.converged = true;
        result.covariance = Eigen::MatrixXd(0, 0);
    } else {
        std::optional<detail::BfgsOutcome> best;
        for (int s = 0; s < config.n_starts; ++s) {
            const Eigen::VectorXd theta0 = detail::start_point(spec, config, s);
            auto run = detail::minimize_bfgs(eval, theta0, config);
            if (!std::isfinite(run.value)) continue;
            if (!best) {
                best = std::move(run);
                continue;
            }
            // prefer converged runs on noise-level ties
            const double tie = 1e-8 * std::max(1.0, std::abs(best->value));
            const bool strictly_better = run.value < best->value - tie;
            const bool tied_and_converged = run.value < best->value + tie &&
                                            run.grad_converged && !best->grad_converged;
            if (strictly_better || tied_and_converged) best = std::move(run);
        }
        if (!best) throw Error("no finite start: the likelihood is non-finite at every start point");
        result.theta = best->x;
        result.coefs = unpack(result.theta, spec);
        result.loglik = -best->value;
        result.converged = best->grad_converged;
        result.n_iter = best->iterations;

        try {
            const Eigen::MatrixXd info = observed_information(result.coefs, spec, data);
            Eigen::LLT<Eigen::MatrixXd> llt(info);
            if (llt.info() == Eigen::Success) {
                result.covariance = llt.solve(Eigen::MatrixXd::Identity(k, k));
            } else {
                result.condition_warning =
                    "observed information is not positive definite; covariance unavailable "
                    "(boundary or flat likelihood)";
            }
        } catch (const Error& e) {
            result.condition_warning =
                std::string("observed information could not be evaluated: ") + e.what();
        }
    }

    if (result.coefs.nu.size() > 0 && result.coefs.nu[0] > 15.0) {
        std::string flag = "Gompertz-boundary: nu0 = " + std::to_string(result.coefs.nu[0]);
        result.condition_warning =
            result.condition_warning ? *result.condition_warning + "; " + flag : flag;
    }
    result.aic = -2.0 * result.loglik + 2.0 * k;
    result.bic = -2.0 * result.loglik + std::log(static_cast<double>(data.n())) * k;
    return result;
}

/// fit() with additional coefficients frozen at given values, e.g.
/// {{Block::Beta, 0}, 0.5}.
inline FitResult profile_refit(const SurvivalDataset& data, const ModelSpec& spec,
                               const OptimizerConfig& config,
                               const std::map<std::pair<Block, int>, double>& frozen) {
    ModelSpec augmented = spec;
    for (const auto& [key, value] : frozen) augmented.fixed_values[key] = value;
    return fit(data, augmented, config);
}

}  // namespace apgw
