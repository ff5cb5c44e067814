#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "apgw/distribution.hpp"
#include "apgw/errors.hpp"
#include "apgw/model.hpp"

// Censored log-likelihood of the four-block APGW regression model,
//
//   l = sum_i [ delta_i { log(lambda_i gamma_i z_i / t_i) + m0(z_i;kappa_i) }
//               - lambda_i H0(z_i;kappa_i) ],   z_i = (phi_i t_i)^{gamma_i},
//
// together with its analytic gradient with respect to the free coefficients.
// The gradient blocks are U_b' X restricted to free entries, where U_tau,
// U_beta, U_alpha follow the generic transformation-model forms and U_nu is
// the re-derived APGW-specific block (see distribution.hpp kernels).

namespace apgw {

namespace detail {

struct EvalStatus {
    bool ok = true;
    double loglik = 0.0;
    std::size_t bad_row = 0;
    int overflow_block = -1;  // >= 0 when a link overflowed
    double overflow_eta = 0.0;
};

// Per-subject likelihood pieces; gradient accumulation optional.
template <bool WithGradient>
inline EvalStatus accumulate_loglik(const SurvivalDataset& data,
                                    const RegressionCoefficients& coefs,
                                    const std::vector<std::pair<Block, int>>* entries,
                                    Eigen::VectorXd* grad) {
    EvalStatus out;
    if constexpr (WithGradient) grad->setZero();
    const int n = data.n();
    const int p = data.p();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto x = data.covariates.row(i);
        double eta[4];
        for (int b = 0; b < 4; ++b) {
            const Eigen::VectorXd& c = coefs.block(static_cast<Block>(b));
            double e = c[0];
            for (int j = 0; j < p; ++j) e += c[j + 1] * x[j];
            eta[b] = e;
            if (!(std::abs(e) <= kMaxLinearPredictor)) {
                out.ok = false;
                out.bad_row = static_cast<std::size_t>(i);
                out.overflow_block = b;
                out.overflow_eta = e;
                out.loglik = -std::numeric_limits<double>::infinity();
                return out;
            }
        }
        const double lambda = std::exp(eta[1]);
        const double gamma = std::exp(eta[2]);
        const double kappa = std::expm1(eta[3]);
        const double log_t = std::log(data.times[i]);
        const double log_z = gamma * (eta[0] + log_t);
        const double z = std::exp(log_z);
        const double L = std::isfinite(z) ? log1p_scaled(z, kappa) : log_z - eta[3];
        const double H0v = (std::abs(kappa) < 1e-10)
                               ? L
                               : (kappa + 1.0) / kappa * std::expm1(kappa * L);
        const bool event = data.status[i] == 1;
        double contrib = -lambda * H0v;
        if (event) contrib += eta[1] + eta[2] + log_z - log_t + (kappa - 1.0) * L;
        if (!std::isfinite(contrib)) {
            out.ok = false;
            out.bad_row = static_cast<std::size_t>(i);
            out.loglik = -std::numeric_limits<double>::infinity();
            return out;
        }
        total += contrib;
        if constexpr (WithGradient) {
            const double S = std::isfinite(z) ? z / (kappa + 1.0 + z) : 1.0;
            const double z_m0p = (kappa - 1.0) * S;                 // z * m0'(z)
            const double z_h0 = std::exp(log_z + (kappa - 1.0) * L);  // z * h0(z)
            const double delta = event ? 1.0 : 0.0;
            const double B = std::exp(kappa * L);
            const double dH0 = (kappa + 1.0) *
                               (L * B + L * L * expm1_ratio_kernel(kappa * L) - B * S);
            double U[4];
            U[0] = delta * gamma * (1.0 + z_m0p) - lambda * gamma * z_h0;
            U[1] = delta - lambda * H0v;
            U[2] = delta * (1.0 + log_z * (1.0 + z_m0p)) - lambda * log_z * z_h0;
            U[3] = delta * ((kappa + 1.0) * L - z_m0p) - lambda * dH0;
            for (std::size_t k = 0; k < entries->size(); ++k) {
                const auto [b, j] = (*entries)[k];
                const double xj = j == 0 ? 1.0 : x[j - 1];
                (*grad)[static_cast<int>(k)] += U[static_cast<int>(b)] * xj;
            }
        }
    }
    if (!std::isfinite(total)) {
        out.ok = false;
        total = -std::numeric_limits<double>::infinity();
    }
    out.loglik = total;
    return out;
}

[[noreturn]] inline void throw_eval_error(const EvalStatus& st) {
    if (st.overflow_block >= 0)
        throw LinkOverflow(to_string(static_cast<Block>(st.overflow_block)), st.overflow_eta);
    throw NonFiniteLikelihood(st.bad_row);
}

inline EvalStatus try_log_likelihood(const SurvivalDataset& data,
                                     const RegressionCoefficients& coefs) {
    return accumulate_loglik<false>(data, coefs, nullptr, nullptr);
}

inline EvalStatus try_score(const SurvivalDataset& data, const RegressionCoefficients& coefs,
                            const std::vector<std::pair<Block, int>>& entries,
                            Eigen::VectorXd& grad) {
    grad.resize(static_cast<Eigen::Index>(entries.size()));
    return accumulate_loglik<true>(data, coefs, &entries, &grad);
}

}  // namespace detail

/// Censored log-likelihood; throws LinkOverflow / NonFiniteLikelihood with
/// the offending row rather than returning -inf.
inline double log_likelihood(const RegressionCoefficients& coefs, const ModelSpec& spec,
                             const SurvivalDataset& data) {
    spec.validate();
    const auto st = detail::try_log_likelihood(data, coefs);
    if (!st.ok) detail::throw_eval_error(st);
    return st.loglik;
}

/// Analytic score: gradient of log_likelihood with respect to the free
/// parameter vector (pack order).
inline Eigen::VectorXd score(const RegressionCoefficients& coefs, const ModelSpec& spec,
                             const SurvivalDataset& data) {
    spec.validate();
    const auto entries = spec.free_entries();
    Eigen::VectorXd grad;
    const auto st = detail::try_score(data, coefs, entries, grad);
    if (!st.ok) detail::throw_eval_error(st);
    return grad;
}

/// Spec-facing cache of per-subject quantities at one coefficient set.
struct LikelihoodWorkspace {
    Eigen::VectorXd z;             // z_i = (phi_i t_i)^{gamma_i}
    std::vector<ApgwParams> subject;
    double loglik = 0.0;
    Eigen::VectorXd score;
};

inline LikelihoodWorkspace evaluate_workspace(const RegressionCoefficients& coefs,
                                              const ModelSpec& spec,
                                              const SurvivalDataset& data) {
    LikelihoodWorkspace w;
    w.subject.reserve(static_cast<std::size_t>(data.n()));
    w.z.resize(data.n());
    for (int i = 0; i < data.n(); ++i) {
        const ApgwParams p = subject_params(coefs, data.covariates.row(i));
        w.z[i] = std::exp(p.gamma * (std::log(p.phi) + std::log(data.times[i])));
        w.subject.push_back(p);
    }
    w.loglik = log_likelihood(coefs, spec, data);
    w.score = score(coefs, spec, data);
    return w;
}

/// Observed information: negative Hessian of the log-likelihood over free
/// dimensions, computed by central finite differences of the analytic score
/// and symmetrised as (A+A')/2.  Definiteness is the caller's concern.
inline Eigen::MatrixXd observed_information(const RegressionCoefficients& coefs,
                                            const ModelSpec& spec, const SurvivalDataset& data) {
    spec.validate();
    const auto entries = spec.free_entries();
    const int k = static_cast<int>(entries.size());
    Eigen::VectorXd theta = pack(coefs, spec);
    Eigen::MatrixXd info(k, k);
    Eigen::VectorXd g_plus, g_minus;
    for (int j = 0; j < k; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
        Eigen::VectorXd tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        auto sp = detail::try_score(data, unpack(tp, spec), entries, g_plus);
        auto sm = detail::try_score(data, unpack(tm, spec), entries, g_minus);
        if (!sp.ok || !sm.ok)
            throw NonFiniteLikelihood(sp.ok ? sm.bad_row : sp.bad_row);
        info.row(j) = -((g_plus - g_minus) / (2.0 * h)).transpose();
    }
    return 0.5 * (info + info.transpose());
}

}  // namespace apgw
