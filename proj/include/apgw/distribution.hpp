#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "apgw/errors.hpp"

// Closed-form primitives of the adapted power generalised Weibull (APGW)
// family.  The cumulative hazard of the full four-parameter model is
//
//   H(t) = lambda * H0((phi*t)^gamma; kappa),
//   H0(z; kappa) = (kappa+1)/kappa * ((1 + z/(kappa+1))^kappa - 1),
//
// with horizontal scale phi (AFT), vertical scale lambda (PH), power shape
// gamma and second shape kappa > -1.  kappa in (-1,0) gives a defective
// (cure) distribution whose survivor function plateaus at exp{lambda(kappa+1)/kappa}.

namespace apgw {

struct ApgwParams {
    double phi;
    double lambda;
    double gamma;
    double kappa;

    ApgwParams(double phi_, double lambda_, double gamma_, double kappa_)
        : phi(phi_), lambda(lambda_), gamma(gamma_), kappa(kappa_) {
        if (!(std::isfinite(phi) && phi > 0.0))
            throw InvalidParameter("phi must be a positive finite real, got " + std::to_string(phi));
        if (!(std::isfinite(lambda) && lambda > 0.0))
            throw InvalidParameter("lambda must be a positive finite real, got " + std::to_string(lambda));
        if (!(std::isfinite(gamma) && gamma > 0.0))
            throw InvalidParameter("gamma must be a positive finite real, got " + std::to_string(gamma));
        if (!(std::isfinite(kappa) && kappa > -1.0))
            throw InvalidParameter("kappa must be a finite real > -1, got " + std::to_string(kappa));
    }

    /// True when the parameter set describes a defective (cure) distribution.
    bool is_cure() const { return kappa < 0.0; }
};

enum class HazardShapeTag { Constant, Decreasing, DownThenUp, UpThenDown, Increasing };

inline const char* to_string(HazardShapeTag tag) {
    switch (tag) {
        case HazardShapeTag::Constant: return "constant";
        case HazardShapeTag::Decreasing: return "decreasing";
        case HazardShapeTag::DownThenUp: return "down-then-up";
        case HazardShapeTag::UpThenDown: return "up-then-down";
        case HazardShapeTag::Increasing: return "increasing";
    }
    return "?";
}

struct HazardShape {
    HazardShapeTag tag;
    // Mode/antimode of the hazard, in natural time units; set only for the
    // two non-monotone tags.
    std::optional<double> turning_point;
};

namespace detail {

// log(1 + t/(kappa+1)), robust to t/(kappa+1) overflowing.
inline double log1p_scaled(double t, double kappa) {
    const double r = t / (kappa + 1.0);
    if (std::isfinite(r)) return std::log1p(r);
    return std::log(t) - std::log1p(kappa);
}

// Baseline cumulative hazard H0(t; kappa) = H_A(t; 1, kappa).
// (1+x)^kappa - 1 is evaluated as expm1(kappa*log1p(x)); the removable
// singularity at kappa = 0 branches to the log-logistic limit.
inline double H0(double t, double kappa) {
    const double L = log1p_scaled(t, kappa);
    if (std::abs(kappa) < 1e-10) return L;
    return (kappa + 1.0) / kappa * std::expm1(kappa * L);
}

// Baseline hazard h0(t; kappa) = (1 + t/(kappa+1))^(kappa-1).
inline double h0(double t, double kappa) {
    return std::exp((kappa - 1.0) * log1p_scaled(t, kappa));
}

// m0 = log h0 and its t-derivative.
inline double m0(double t, double kappa) { return (kappa - 1.0) * log1p_scaled(t, kappa); }

inline double m0_prime(double t, double kappa) { return (kappa - 1.0) / (kappa + 1.0 + t); }

// q(u) = (u e^u - expm1(u)) / u^2, the analytic kernel of dH0/dkappa.
// Series below |u| = 1e-3 where the direct form cancels.
inline double expm1_ratio_kernel(double u) {
    if (std::abs(u) < 1e-3) {
        return 0.5 + u * (1.0 / 3.0 + u * (1.0 / 8.0 + u * (1.0 / 30.0 + u / 144.0)));
    }
    return (u * std::exp(u) - std::expm1(u)) / (u * u);
}

// (kappa+1) * d/dkappa H0(t; kappa); this is the censoring part of the score
// with respect to the nu = log(kappa+1) linear predictor.  Derivation from
// H0 above gives (kappa+1) * [L*B + L^2*q(kappa*L) - B*S] with
// L = log1p(t/(kappa+1)), B = e^{kappa L}, S = t/(kappa+1+t); all removable
// singularities (kappa -> 0, kappa -> 1) cancel in this form.
inline double dH0_dnu(double t, double kappa) {
    const double L = log1p_scaled(t, kappa);
    const double B = std::exp(kappa * L);
    const double S = std::isfinite(t) ? t / (kappa + 1.0 + t) : 1.0;
    return (kappa + 1.0) * (L * B + L * L * expm1_ratio_kernel(kappa * L) - B * S);
}

// (kappa+1) * d/dkappa m0(t; kappa) = (kappa+1)L - t*m0'(t;kappa).
inline double dm0_dnu(double t, double kappa) {
    const double L = log1p_scaled(t, kappa);
    const double S = std::isfinite(t) ? t / (kappa + 1.0 + t) : 1.0;
    return (kappa + 1.0) * L - (kappa - 1.0) * S;
}

inline void require_positive_time(double t) {
    if (!(std::isfinite(t) && t > 0.0))
        throw DomainViolation("time must be a positive finite real, got " + std::to_string(t));
}

// Shared per-(t, params) quantities.
struct PointEval {
    double log_z;   // gamma * log(phi * t)
    double z;       // (phi t)^gamma, may saturate to +inf
    double L;       // log1p(z / (kappa+1))
    double H;       // lambda * H0(z; kappa)
    double log_h;   // log hazard
};

inline PointEval evaluate(double t, const ApgwParams& p) {
    PointEval e;
    e.log_z = p.gamma * (std::log(p.phi) + std::log(t));
    e.z = std::exp(e.log_z);
    e.L = std::isfinite(e.z) ? log1p_scaled(e.z, p.kappa)
                             : e.log_z - std::log1p(p.kappa);
    if (std::abs(p.kappa) < 1e-10) {
        e.H = p.lambda * e.L;
    } else {
        e.H = p.lambda * (p.kappa + 1.0) / p.kappa * std::expm1(p.kappa * e.L);
    }
    // h(t) = lambda * gamma * z/t * h0(z); kept in log form so z*h0 cannot
    // produce inf*0.
    e.log_h = std::log(p.lambda) + std::log(p.gamma) + e.log_z - std::log(t) +
              (p.kappa - 1.0) * e.L;
    return e;
}

}  // namespace detail

/// Cumulative hazard H(t) = lambda * H0((phi t)^gamma; kappa).
inline double cum_hazard(double t, const ApgwParams& p) {
    detail::require_positive_time(t);
    return detail::evaluate(t, p).H;
}

/// Hazard h(t) = lambda * phi * gamma * (phi t)^(gamma-1) * (1 + (phi t)^gamma/(kappa+1))^(kappa-1).
inline double hazard(double t, const ApgwParams& p) {
    detail::require_positive_time(t);
    return std::exp(detail::evaluate(t, p).log_h);
}

/// Survivor function S(t) = exp(-H(t)).
inline double survivor(double t, const ApgwParams& p) {
    detail::require_positive_time(t);
    return std::exp(-detail::evaluate(t, p).H);
}

/// Density f(t) = h(t) * S(t).
inline double density(double t, const ApgwParams& p) {
    detail::require_positive_time(t);
    const auto e = detail::evaluate(t, p);
    return std::exp(e.log_h - e.H);
}

/// Cure probability lim_{t->inf} S(t) = exp{lambda (kappa+1)/kappa}, defined
/// for kappa in (-1, 0) only.
inline double cure_probability(const ApgwParams& p) {
    if (!(p.kappa < 0.0))
        throw DomainViolation("cure probability requires kappa in (-1,0), got kappa = " +
                              std::to_string(p.kappa));
    return std::exp(p.lambda * (p.kappa + 1.0) / p.kappa);
}

/// Supremum of the cumulative hazard: +inf for kappa >= 0, lambda(kappa+1)/(-kappa)
/// for cure models (so cure_probability == exp(-cum_hazard_sup)).
inline double cum_hazard_sup(const ApgwParams& p) {
    if (p.kappa >= 0.0) return std::numeric_limits<double>::infinity();
    return p.lambda * (p.kappa + 1.0) / (-p.kappa);
}

/// Quantile function: the t with 1 - S(t) = u.  For cure models only
/// u < 1 - cure_probability is feasible; beyond that CurePlateau is thrown.
inline double quantile(double u, const ApgwParams& p) {
    if (!(u > 0.0 && u < 1.0))
        throw DomainViolation("quantile level must lie strictly in (0,1), got " + std::to_string(u));
    const double y = -std::log1p(-u);  // target cumulative hazard
    const double w = y / p.lambda;
    if (p.kappa < 0.0 && !(w < (p.kappa + 1.0) / (-p.kappa))) {
        throw CurePlateau("quantile level " + std::to_string(u) +
                          " is beyond the cure plateau (feasible u < " +
                          std::to_string(1.0 - cure_probability(p)) + ")");
    }
    double expo;
    if (std::abs(p.kappa) < 1e-10) {
        expo = w / (p.kappa + 1.0);
    } else {
        expo = std::log1p(p.kappa * w / (p.kappa + 1.0)) / p.kappa;
    }
    const double z = (p.kappa + 1.0) * std::expm1(expo);  // (phi t)^gamma
    return std::exp(std::log(z) / p.gamma - std::log(p.phi));
}

/// Classifies the hazard shape from the signs of gamma-1 and kappa*gamma-1
/// (ties at |.| <= 1e-12 follow the convention that only the double tie is
/// constant).  The turning point, present for the two non-monotone shapes,
/// is {(1-gamma)(kappa+1)/(kappa*gamma-1)}^(1/gamma) / phi in natural time.
inline HazardShape classify_shape(const ApgwParams& p) {
    constexpr double tol = 1e-12;
    const double a = p.gamma - 1.0;
    const double b = p.kappa * p.gamma - 1.0;
    auto turning = [&]() {
        const double core = (1.0 - p.gamma) * (p.kappa + 1.0) / (p.kappa * p.gamma - 1.0);
        return std::pow(core, 1.0 / p.gamma) / p.phi;
    };
    if (std::abs(a) <= tol && std::abs(b) <= tol) return {HazardShapeTag::Constant, std::nullopt};
    if (a > tol && b < -tol) return {HazardShapeTag::UpThenDown, turning()};
    if (a < -tol && b > tol) return {HazardShapeTag::DownThenUp, turning()};
    if (a <= tol && b <= tol) return {HazardShapeTag::Decreasing, std::nullopt};
    return {HazardShapeTag::Increasing, std::nullopt};
}

/// Original (non-adapted) power generalised Weibull cumulative hazard
/// H_N(t; gamma, kappa) = (1 + t^gamma)^kappa - 1, for gamma, kappa > 0.
inline double pgw_cum_hazard(double t, double gamma, double kappa) {
    detail::require_positive_time(t);
    if (!(std::isfinite(gamma) && gamma > 0.0))
        throw InvalidParameter("pgw gamma must be positive, got " + std::to_string(gamma));
    if (!(std::isfinite(kappa) && kappa > 0.0))
        throw InvalidParameter("pgw kappa must be positive, got " + std::to_string(kappa));
    const double tg = std::exp(gamma * std::log(t));
    return std::expm1(kappa * std::log1p(tg));
}

}  // namespace apgw
