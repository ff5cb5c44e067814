#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "apgw/distribution.hpp"
#include "apgw/errors.hpp"

// Regression layer: maps covariate rows to per-subject ApgwParams through
// log links, and encodes which coefficients the M(.) model notation leaves
// free.  Design matrix convention: an intercept column of ones is implicit
// at position 0, datasets store raw covariates only.

namespace apgw {

enum class Block { Tau, Beta, Alpha, Nu };

inline constexpr std::array<Block, 4> kAllBlocks{Block::Tau, Block::Beta, Block::Alpha, Block::Nu};

inline const char* to_string(Block b) {
    switch (b) {
        case Block::Tau: return "tau";
        case Block::Beta: return "beta";
        case Block::Alpha: return "alpha";
        case Block::Nu: return "nu";
    }
    return "?";
}

/// Largest linear predictor magnitude the log links accept.
inline constexpr double kMaxLinearPredictor = 700.0;

/// The four coefficient blocks tau (log phi), beta (log lambda),
/// alpha (log gamma), nu (log(kappa+1)); each of length p+1 with the
/// intercept at index 0.
struct RegressionCoefficients {
    Eigen::VectorXd tau, beta, alpha, nu;

    RegressionCoefficients() = default;

    explicit RegressionCoefficients(int n_covariates)
        : tau(Eigen::VectorXd::Zero(n_covariates + 1)),
          beta(Eigen::VectorXd::Zero(n_covariates + 1)),
          alpha(Eigen::VectorXd::Zero(n_covariates + 1)),
          nu(Eigen::VectorXd::Zero(n_covariates + 1)) {}

    Eigen::VectorXd& block(Block b) {
        switch (b) {
            case Block::Tau: return tau;
            case Block::Beta: return beta;
            case Block::Alpha: return alpha;
            default: return nu;
        }
    }
    const Eigen::VectorXd& block(Block b) const {
        return const_cast<RegressionCoefficients*>(this)->block(b);
    }

    int size() const { return static_cast<int>(tau.size()); }

    bool same_shape() const {
        return tau.size() == beta.size() && tau.size() == alpha.size() && tau.size() == nu.size() &&
               tau.size() >= 1;
    }
};

/// Which regression components are active (covariate slopes estimated) and
/// which coefficients are frozen at fixed values.  Per the M(.) convention
/// the alpha and nu intercepts are always present: estimable unless an
/// explicit fixed value is supplied.  A scale block that is not active has
/// all of its coefficients fixed at 0 unless overridden.
struct ModelSpec {
    int n_covariates = 0;
    std::set<Block> active;
    std::map<std::pair<Block, int>, double> fixed_values;
    std::vector<std::string> covariate_names;
    // Permits tau and beta slopes simultaneously; nearly unidentifiable in
    // finite samples, so only for diagnostics.
    bool allow_two_scales = false;

    void validate() const {
        if (n_covariates < 0) throw DimensionMismatch("negative covariate count");
        if (!covariate_names.empty() &&
            static_cast<int>(covariate_names.size()) != n_covariates)
            throw DimensionMismatch("covariate_names length does not match n_covariates");
        if (active.count(Block::Tau) && active.count(Block::Beta) && !allow_two_scales)
            throw ConfigError(
                "model activates both tau and beta scale blocks; pass allow_two_scales "
                "to fit this diagnostics-only configuration");
        for (const auto& [key, value] : fixed_values) {
            if (key.second < 0 || key.second > n_covariates)
                throw DimensionMismatch("fixed value index " + std::to_string(key.second) +
                                        " outside 0.." + std::to_string(n_covariates) +
                                        " for block " + to_string(key.first));
            if (!std::isfinite(value))
                throw ConfigError(std::string("fixed value for ") + to_string(key.first) +
                                  std::to_string(key.second) + " is not finite");
        }
    }

    bool two_scales_active() const {
        return active.count(Block::Tau) && active.count(Block::Beta);
    }

    std::optional<double> fixed_at(Block b, int idx) const {
        auto it = fixed_values.find({b, idx});
        if (it != fixed_values.end()) return it->second;
        if (b == Block::Tau || b == Block::Beta) {
            if (!active.count(b)) return 0.0;
            return std::nullopt;
        }
        // shape blocks: intercept free by default, slopes follow activity
        if (idx == 0) return std::nullopt;
        if (!active.count(b)) return 0.0;
        return std::nullopt;
    }

    bool is_free(Block b, int idx) const { return !fixed_at(b, idx).has_value(); }

    /// Free entries in pack order: tau block first, then beta, alpha, nu;
    /// ascending index within each block.
    std::vector<std::pair<Block, int>> free_entries() const {
        std::vector<std::pair<Block, int>> out;
        for (Block b : kAllBlocks)
            for (int j = 0; j <= n_covariates; ++j)
                if (is_free(b, j)) out.emplace_back(b, j);
        return out;
    }

    int n_free() const { return static_cast<int>(free_entries().size()); }

    std::string entry_label(Block b, int idx) const {
        std::string base = to_string(b);
        if (idx == 0) return base + ":(Intercept)";
        if (static_cast<int>(covariate_names.size()) >= idx && !covariate_names.empty())
            return base + ":" + covariate_names[idx - 1];
        return base + ":x" + std::to_string(idx);
    }

    /// Short display name in the M(.) notation, e.g. "M(beta,alpha)".
    std::string name() const {
        std::string out = "M(";
        bool first = true;
        for (Block b : kAllBlocks) {
            if (!active.count(b)) continue;
            if (!first) out += ",";
            out += to_string(b);
            first = false;
        }
        return out + ")";
    }
};

/// Survival data: strictly positive times, event indicator (1 = observed,
/// 0 = right-censored), and an n x p covariate matrix.
struct SurvivalDataset {
    Eigen::VectorXd times;
    Eigen::VectorXi status;
    Eigen::MatrixXd covariates;
    std::vector<std::string> names;

    int n() const { return static_cast<int>(times.size()); }
    int p() const { return static_cast<int>(covariates.cols()); }

    void validate() const {
        if (times.size() != status.size())
            throw DimensionMismatch("times and status lengths differ");
        if (covariates.rows() != 0 && covariates.rows() != times.size())
            throw DimensionMismatch("covariate row count does not match times");
        if (!names.empty() && static_cast<int>(names.size()) != p())
            throw DimensionMismatch("covariate name count does not match matrix width");
        for (int i = 0; i < n(); ++i) {
            if (!(std::isfinite(times[i]) && times[i] > 0.0))
                throw DataError("row " + std::to_string(i + 1) + ": time must be positive, got " +
                                std::to_string(times[i]));
            if (status[i] != 0 && status[i] != 1)
                throw DataError("row " + std::to_string(i + 1) + ": status must be 0 or 1, got " +
                                std::to_string(status[i]));
            for (int j = 0; j < p(); ++j)
                if (!std::isfinite(covariates(i, j)))
                    throw DataError("row " + std::to_string(i + 1) + ": covariate '" +
                                    (j < static_cast<int>(names.size()) ? names[j]
                                                                        : "x" + std::to_string(j + 1)) +
                                    "' is not finite");
        }
    }
};

namespace detail {

// x'c with the implicit leading 1; x is a raw covariate row of length p.
template <typename Row>
inline double linear_predictor(const Eigen::VectorXd& coefs, const Row& x) {
    double eta = coefs[0];
    for (int j = 0; j < static_cast<int>(x.size()); ++j) eta += coefs[j + 1] * x[j];
    return eta;
}

}  // namespace detail

/// Per-subject distributional parameters through the log links:
/// phi = e^{x't}, lambda = e^{x'b}, gamma = e^{x'a}, kappa = e^{x'v} - 1.
template <typename Row>
inline ApgwParams subject_params(const RegressionCoefficients& coefs, const Row& x) {
    if (!coefs.same_shape()) throw DimensionMismatch("coefficient blocks have unequal lengths");
    if (static_cast<int>(x.size()) + 1 != coefs.size())
        throw DimensionMismatch("covariate row length " + std::to_string(x.size()) +
                                " does not match coefficient length " +
                                std::to_string(coefs.size()));
    const double eta_phi = detail::linear_predictor(coefs.tau, x);
    const double eta_lambda = detail::linear_predictor(coefs.beta, x);
    const double eta_gamma = detail::linear_predictor(coefs.alpha, x);
    const double eta_nu = detail::linear_predictor(coefs.nu, x);
    for (auto [eta, b] : {std::pair{eta_phi, Block::Tau}, {eta_lambda, Block::Beta},
                          {eta_gamma, Block::Alpha}, {eta_nu, Block::Nu}}) {
        if (!(std::abs(eta) <= kMaxLinearPredictor)) throw LinkOverflow(to_string(b), eta);
    }
    return ApgwParams(std::exp(eta_phi), std::exp(eta_lambda), std::exp(eta_gamma),
                      std::expm1(eta_nu));
}

/// Free coefficients in pack order (fixed entries dropped).
inline Eigen::VectorXd pack(const RegressionCoefficients& coefs, const ModelSpec& spec) {
    spec.validate();
    if (coefs.size() != spec.n_covariates + 1)
        throw DimensionMismatch("coefficient length does not match model spec");
    const auto entries = spec.free_entries();
    Eigen::VectorXd out(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k)
        out[static_cast<int>(k)] = coefs.block(entries[k].first)[entries[k].second];
    return out;
}

/// Rebuilds full coefficient blocks from a free vector; fixed entries are
/// restored from the spec.
inline RegressionCoefficients unpack(const Eigen::VectorXd& theta, const ModelSpec& spec) {
    spec.validate();
    const auto entries = spec.free_entries();
    if (theta.size() != static_cast<Eigen::Index>(entries.size()))
        throw DimensionMismatch("free vector length " + std::to_string(theta.size()) +
                                " does not match spec dimension " +
                                std::to_string(entries.size()));
    RegressionCoefficients coefs(spec.n_covariates);
    for (Block b : kAllBlocks)
        for (int j = 0; j <= spec.n_covariates; ++j)
            if (auto v = spec.fixed_at(b, j)) coefs.block(b)[j] = *v;
    for (std::size_t k = 0; k < entries.size(); ++k)
        coefs.block(entries[k].first)[entries[k].second] = theta[static_cast<int>(k)];
    return coefs;
}

/// Parses the M(.) grammar, e.g. "M(beta,alpha)".  Components are drawn from
/// {tau,beta,alpha,nu}; at least one scale block must be present; tau and
/// beta together require allow_two_scales.
inline ModelSpec parse_model_spec(const std::string& text, int n_covariates,
                                  std::vector<std::string> covariate_names = {},
                                  bool allow_two_scales = false) {
    auto fail = [&](const std::string& why) {
        throw ConfigError("invalid model '" + text + "': " + why);
    };
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    if (s.size() < 3 || (s[0] != 'M' && s[0] != 'm') || s[1] != '(' || s.back() != ')')
        fail("expected the form M(component,...)");
    ModelSpec spec;
    spec.n_covariates = n_covariates;
    spec.covariate_names = std::move(covariate_names);
    spec.allow_two_scales = allow_two_scales;
    std::string body = s.substr(2, s.size() - 3);
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t comma = body.find(',', pos);
        std::string tok = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        pos = comma == std::string::npos ? body.size() : comma + 1;
        if (tok == "tau") spec.active.insert(Block::Tau);
        else if (tok == "beta") spec.active.insert(Block::Beta);
        else if (tok == "alpha") spec.active.insert(Block::Alpha);
        else if (tok == "nu") spec.active.insert(Block::Nu);
        else fail("unknown component '" + tok + "' (expected tau, beta, alpha or nu)");
    }
    if (!spec.active.count(Block::Tau) && !spec.active.count(Block::Beta))
        fail("at least one scale component (tau or beta) is required");
    spec.validate();
    return spec;
}

/// Parses a coefficient key of the form block name + index, e.g. "nu0",
/// "tau2", as used by fix lists.
inline std::pair<Block, int> parse_coefficient_key(const std::string& key) {
    static const std::vector<std::pair<std::string, Block>> prefixes{
        {"tau", Block::Tau}, {"beta", Block::Beta}, {"alpha", Block::Alpha}, {"nu", Block::Nu}};
    for (const auto& [name, block] : prefixes) {
        if (key.rfind(name, 0) == 0 && key.size() > name.size()) {
            const std::string idx = key.substr(name.size());
            if (std::all_of(idx.begin(), idx.end(),
                            [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
                return {block, std::stoi(idx)};
        }
    }
    throw ConfigError("invalid coefficient key '" + key +
                      "' (expected e.g. tau0, beta1, alpha0, nu0)");
}

}  // namespace apgw
