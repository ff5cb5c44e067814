#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "apgw/distribution.hpp"
#include "apgw/errors.hpp"
#include "apgw/model.hpp"
#include "apgw/optimizer.hpp"

// Post-fit summaries: Wald standard errors and intervals, hazard- and
// quantile-ratio curves for a binary covariate, survivor/hazard curve
// evaluation, cure proportions with delta-method intervals, and AIC/BIC
// comparison tables across a fitted model set.

namespace apgw {

namespace detail {

// Acklam's rational approximation to the standard normal quantile,
// |relative error| < 1.15e-9 over (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw DomainViolation("normal quantile needs p in (0,1), got " + std::to_string(p));
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double q, r;
    if (p < p_low) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        q = p - 0.5;
        r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

inline const Eigen::MatrixXd& covariance_or_throw(const FitResult& fit) {
    if (!fit.covariance)
        throw CovarianceUnavailable(
            "fit has no covariance matrix" +
            (fit.condition_warning ? " (" + *fit.condition_warning + ")" : std::string()));
    return *fit.covariance;
}

// Linear predictor of one block at a raw covariate row.
inline double block_eta(const FitResult& fit, Block b, const Eigen::RowVectorXd& x) {
    return linear_predictor(fit.coefs.block(b), x);
}

}  // namespace detail

/// sqrt of the covariance diagonal, one entry per free coefficient (pack order).
inline Eigen::VectorXd standard_errors(const FitResult& fit) {
    return detail::covariance_or_throw(fit).diagonal().cwiseMax(0.0).cwiseSqrt();
}

/// Wald intervals estimate +/- z * SE at the given two-sided level.
inline std::vector<std::pair<double, double>> wald_ci(const FitResult& fit, double level = 0.95) {
    if (!(level > 0.0 && level < 1.0))
        throw DomainViolation("confidence level must lie in (0,1)");
    const Eigen::VectorXd se = standard_errors(fit);
    const double z = detail::normal_quantile(0.5 + level / 2.0);
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(se.size()));
    for (int j = 0; j < se.size(); ++j)
        out.emplace_back(fit.theta[j] - z * se[j], fit.theta[j] + z * se[j]);
    return out;
}

/// Hazard ratio h(t | x_j=1) / h(t | x_j=0) over a time grid, for the
/// 0-based covariate column j, other covariates held at base_profile.  Uses
/// the closed algebraic form when the j-th tau and nu slopes vanish (the
/// ratio then depends on t only through the shared kappa), and the direct
/// hazard ratio otherwise.
inline std::vector<double> hazard_ratio_curve(const FitResult& fit, int j,
                                              const Eigen::RowVectorXd& base_profile,
                                              const std::vector<double>& grid) {
    const int p = fit.spec.n_covariates;
    if (j < 0 || j >= p) throw DimensionMismatch("covariate index out of range");
    if (base_profile.size() != p) throw DimensionMismatch("base profile length must be p");
    for (double t : grid)
        if (!(t > 0.0))
            throw DomainViolation("hazard ratio grid must be strictly positive");

    Eigen::RowVectorXd x0 = base_profile, x1 = base_profile;
    x0[j] = 0.0;
    x1[j] = 1.0;
    const double tau_j = fit.coefs.tau[j + 1];
    const double nu_j = fit.coefs.nu[j + 1];
    std::vector<double> out;
    out.reserve(grid.size());
    if (tau_j == 0.0 && nu_j == 0.0) {
        const double beta_j = fit.coefs.beta[j + 1];
        const double alpha_j = fit.coefs.alpha[j + 1];
        const double gamma0 = std::exp(detail::block_eta(fit, Block::Alpha, x0));
        const double gamma1 = gamma0 * std::exp(alpha_j);
        const double kappa = std::expm1(detail::block_eta(fit, Block::Nu, x0));
        const double phi = std::exp(detail::block_eta(fit, Block::Tau, x0));
        for (double t : grid) {
            const double log_s = std::log(phi) + std::log(t);
            const double L1 = detail::log1p_scaled(std::exp(gamma1 * log_s), kappa);
            const double L0 = detail::log1p_scaled(std::exp(gamma0 * log_s), kappa);
            const double log_hr = beta_j + alpha_j +
                                  gamma0 * std::expm1(alpha_j) * log_s +
                                  (kappa - 1.0) * (L1 - L0);
            out.push_back(std::exp(log_hr));
        }
    } else {
        const ApgwParams p1 = subject_params(fit.coefs, x1);
        const ApgwParams p0 = subject_params(fit.coefs, x0);
        for (double t : grid) out.push_back(hazard(t, p1) / hazard(t, p0));
    }
    return out;
}

/// Quantile ratio Q(u | x_j=1) / Q(u | x_j=0) over a grid of levels u.
/// Requires a tau scale component.  Closed form when the j-th beta and nu
/// slopes vanish; direct quantile ratio otherwise.
inline std::vector<double> quantile_ratio_curve(const FitResult& fit, int j,
                                                const Eigen::RowVectorXd& base_profile,
                                                const std::vector<double>& u_grid) {
    const int p = fit.spec.n_covariates;
    if (j < 0 || j >= p) throw DimensionMismatch("covariate index out of range");
    if (base_profile.size() != p) throw DimensionMismatch("base profile length must be p");
    if (!fit.spec.active.count(Block::Tau))
        throw ConfigError("quantile ratios need a model with a tau scale component");
    for (double u : u_grid)
        if (!(u > 0.0 && u < 1.0))
            throw DomainViolation("quantile ratio levels must lie strictly in (0,1)");

    Eigen::RowVectorXd x0 = base_profile, x1 = base_profile;
    x0[j] = 0.0;
    x1[j] = 1.0;
    const double beta_j = fit.coefs.beta[j + 1];
    const double nu_j = fit.coefs.nu[j + 1];
    std::vector<double> out;
    out.reserve(u_grid.size());
    if (beta_j == 0.0 && nu_j == 0.0) {
        const double tau_j = fit.coefs.tau[j + 1];
        const double alpha_j = fit.coefs.alpha[j + 1];
        const double inv_gamma0 = std::exp(-detail::block_eta(fit, Block::Alpha, x0));
        const double kappa = std::expm1(detail::block_eta(fit, Block::Nu, x0));
        const double lambda = std::exp(detail::block_eta(fit, Block::Beta, x0));
        const double exponent = inv_gamma0 * std::expm1(-alpha_j);
        for (double u : u_grid) {
            const double w = -std::log1p(-u) / lambda;
            if (kappa < 0.0 && !(w < (kappa + 1.0) / (-kappa)))
                throw CurePlateau("quantile ratio level " + std::to_string(u) +
                                  " is beyond the cure plateau");
            double expo;
            if (std::abs(kappa) < 1e-10) {
                expo = w / (kappa + 1.0);
            } else {
                expo = std::log1p(kappa * w / (kappa + 1.0)) / kappa;
            }
            const double log_K = std::log((kappa + 1.0) * std::expm1(expo));
            out.push_back(std::exp(-tau_j + exponent * log_K));
        }
    } else {
        const ApgwParams p1 = subject_params(fit.coefs, x1);
        const ApgwParams p0 = subject_params(fit.coefs, x0);
        for (double u : u_grid) out.push_back(quantile(u, p1) / quantile(u, p0));
    }
    return out;
}

/// Cure proportion with a delta-method interval for one covariate profile.
struct CureEstimate {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct CureReport {
    std::vector<CureEstimate> profiles;
    // First minus second profile, present when exactly two profiles were given.
    std::optional<CureEstimate> difference;
    double level = 0.95;
};

/// Cure proportions exp{lambda(kappa+1)/kappa} at each profile with CIs
/// computed on the log(-log p) scale (kept inside (0,1)); the difference
/// between two profiles gets a plain-scale delta-method interval.
inline CureReport cure_report(const FitResult& fit,
                              const std::vector<Eigen::RowVectorXd>& profiles,
                              double level = 0.95) {
    if (profiles.empty()) throw ConfigError("cure report needs at least one profile");
    const Eigen::MatrixXd& cov = detail::covariance_or_throw(fit);
    const double z = detail::normal_quantile(0.5 + level / 2.0);
    const auto entries = fit.spec.free_entries();

    CureReport report;
    report.level = level;
    std::vector<Eigen::VectorXd> dp;  // gradient of p itself per profile
    std::vector<double> p_hat;
    for (const auto& x : profiles) {
        const ApgwParams params = subject_params(fit.coefs, x);
        if (!(params.kappa < 0.0))
            throw Error("not a cure model at this profile: fitted kappa = " +
                        std::to_string(params.kappa) + " >= 0");
        const double lambda = params.lambda;
        const double kappa = params.kappa;
        const double c = lambda * (kappa + 1.0) / kappa;  // log p < 0
        const double p = std::exp(c);

        // eta = log(-log p) = x'beta + x'nu - log(1 - e^{x'nu}); gradients
        // over free entries.
        Eigen::VectorXd g_eta = Eigen::VectorXd::Zero(static_cast<int>(entries.size()));
        Eigen::VectorXd g_p = Eigen::VectorXd::Zero(static_cast<int>(entries.size()));
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto [b, idx] = entries[k];
            const double xk = idx == 0 ? 1.0 : x[idx - 1];
            if (b == Block::Beta) {
                g_eta[static_cast<int>(k)] = xk;
                g_p[static_cast<int>(k)] = p * c * xk;
            } else if (b == Block::Nu) {
                g_eta[static_cast<int>(k)] = xk / (-kappa);
                g_p[static_cast<int>(k)] = -p * lambda * (kappa + 1.0) / (kappa * kappa) * xk;
            }
        }
        const double var_eta = g_eta.dot(cov * g_eta);
        const double se_eta = std::sqrt(std::max(0.0, var_eta));
        const double eta = std::log(-c);
        CureEstimate est;
        est.estimate = p;
        est.lower = std::exp(-std::exp(eta + z * se_eta));
        est.upper = std::exp(-std::exp(eta - z * se_eta));
        report.profiles.push_back(est);
        dp.push_back(std::move(g_p));
        p_hat.push_back(p);
    }
    if (profiles.size() == 2) {
        const Eigen::VectorXd g = dp[0] - dp[1];
        const double se = std::sqrt(std::max(0.0, g.dot(cov * g)));
        CureEstimate diff;
        diff.estimate = p_hat[0] - p_hat[1];
        diff.lower = diff.estimate - z * se;
        diff.upper = diff.estimate + z * se;
        report.difference = diff;
    }
    return report;
}

/// One row of a model comparison table.
struct ModelTableRow {
    std::string name;
    int dim = 0;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double delta_aic = 0.0;
    double delta_bic = 0.0;
    bool converged = true;
};

/// AIC/BIC comparison across fits of the same dataset; deltas are relative
/// to the minimum in the set.
inline std::vector<ModelTableRow> model_table(const std::vector<FitResult>& fits) {
    if (fits.empty()) throw ConfigError("model table needs at least one fit");
    for (const auto& f : fits)
        if (f.data_digest != fits.front().data_digest || f.n_obs != fits.front().n_obs)
            throw Error("model table mixes fits from different datasets");
    double min_aic = fits.front().aic, min_bic = fits.front().bic;
    for (const auto& f : fits) {
        min_aic = std::min(min_aic, f.aic);
        min_bic = std::min(min_bic, f.bic);
    }
    std::vector<ModelTableRow> rows;
    rows.reserve(fits.size());
    for (const auto& f : fits) {
        ModelTableRow row;
        row.name = f.spec.name();
        row.dim = f.dim();
        row.loglik = f.loglik;
        row.aic = f.aic;
        row.bic = f.bic;
        row.delta_aic = f.aic - min_aic;
        row.delta_bic = f.bic - min_bic;
        row.converged = f.converged;
        rows.push_back(std::move(row));
    }
    return rows;
}

enum class CurveKind { Survivor, Hazard, HazardRatio, QuantileRatio };

/// A curve evaluation request: profile (and comparison profile for the two
/// ratio kinds) plus a strictly increasing grid (times, or levels in (0,1)
/// for the quantile ratio).
struct CurveRequest {
    CurveKind kind = CurveKind::Survivor;
    Eigen::RowVectorXd profile;
    std::optional<Eigen::RowVectorXd> profile2;
    std::vector<double> grid;

    void validate(int p) const {
        if (profile.size() != p) throw DimensionMismatch("curve profile length must be p");
        const bool ratio = kind == CurveKind::HazardRatio || kind == CurveKind::QuantileRatio;
        if (ratio && (!profile2 || profile2->size() != p))
            throw ConfigError("ratio curves need a comparison profile");
        if (grid.empty()) throw ConfigError("curve grid is empty");
        for (std::size_t i = 0; i + 1 < grid.size(); ++i)
            if (!(grid[i] < grid[i + 1]))
                throw ConfigError("curve grid must be strictly increasing");
    }
};

/// Evaluates a curve request against a fit; ratio kinds divide the second
/// profile's curve by the first's.
inline std::vector<double> evaluate_curve(const FitResult& fit, const CurveRequest& req) {
    req.validate(fit.spec.n_covariates);
    std::vector<double> out;
    out.reserve(req.grid.size());
    const ApgwParams base = subject_params(fit.coefs, req.profile);
    switch (req.kind) {
        case CurveKind::Survivor:
            for (double t : req.grid) out.push_back(survivor(t, base));
            break;
        case CurveKind::Hazard:
            for (double t : req.grid) out.push_back(hazard(t, base));
            break;
        case CurveKind::HazardRatio: {
            const ApgwParams other = subject_params(fit.coefs, *req.profile2);
            for (double t : req.grid) out.push_back(hazard(t, other) / hazard(t, base));
            break;
        }
        case CurveKind::QuantileRatio: {
            const ApgwParams other = subject_params(fit.coefs, *req.profile2);
            for (double u : req.grid) out.push_back(quantile(u, other) / quantile(u, base));
            break;
        }
    }
    return out;
}

}  // namespace apgw
