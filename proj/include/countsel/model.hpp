#pragma once

// Model specifications, parameter vectors and the conditional-mean recursion
// of observation-driven count models:
//
//   lambda_t = alpha0 + sum_i alpha_i Y_{t-i} + sum_j beta_j lambda_{t-j}
//              + sum_k gamma_k (Y_{t-1} - xi_k)^+
//
// Two dynamic forms are supported: INGARCH(p,q), and the knot model with a
// single lag, optional lambda_{t-1} feedback and K piecewise-linear terms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "countsel/errors.hpp"

namespace countsel {

/// Lower bound on every conditional mean and on the intercept.
inline constexpr double kLowerMean = 1e-4;
/// Minimum distance of the coefficient sum from 1.
inline constexpr double kStationarityMargin = 1e-6;

using CountSeries = std::vector<std::int64_t>;

enum class FamilyKind { Poisson, NegBinomial, Bernoulli };

struct EmissionFamily {
    FamilyKind kind = FamilyKind::Poisson;
    int r = 0;  // NegBinomial only

    static EmissionFamily poisson() { return {FamilyKind::Poisson, 0}; }
    static EmissionFamily bernoulli() { return {FamilyKind::Bernoulli, 0}; }
    static EmissionFamily negbin(int r) {
        if (r < 1) throw DomainError("negative binomial r must be >= 1");
        return {FamilyKind::NegBinomial, r};
    }

    bool is_bernoulli() const { return kind == FamilyKind::Bernoulli; }

    std::string descriptor() const {
        switch (kind) {
            case FamilyKind::Poisson: return "poisson";
            case FamilyKind::NegBinomial: return "nb:" + std::to_string(r);
            case FamilyKind::Bernoulli: return "bernoulli";
        }
        return "unknown";
    }

    friend bool operator==(const EmissionFamily&, const EmissionFamily&) = default;
};

struct IngarchForm {
    int p = 0;
    int q = 0;
    friend bool operator==(const IngarchForm&, const IngarchForm&) = default;
};

struct KnotForm {
    std::vector<int> knots;  // strictly increasing, non-negative
    bool with_feedback = true;
    friend bool operator==(const KnotForm&, const KnotForm&) = default;
};

using DynamicForm = std::variant<IngarchForm, KnotForm>;

/// Positive part basis (y - xi)^+ of the knot model.
inline double knot_basis(std::int64_t y, std::int64_t xi) {
    return static_cast<double>(std::max<std::int64_t>(y - xi, 0));
}

/// A member of a parametric family: emission family, dynamic form and the
/// set of free non-intercept coefficients (1-based positions in the flat
/// parameter layout). The intercept is always free.
class ModelSpec {
public:
    ModelSpec(EmissionFamily family, DynamicForm form, std::vector<int> active)
        : family_(family), form_(std::move(form)), active_(std::move(active)) {
        if (const auto* g = std::get_if<IngarchForm>(&form_)) {
            if (g->p < 0 || g->q < 0) throw DomainError("INGARCH orders must be non-negative");
        } else {
            const auto& k = std::get<KnotForm>(form_).knots;
            for (std::size_t i = 0; i < k.size(); ++i) {
                if (k[i] < 0) throw DomainError("knots must be non-negative");
                if (i > 0 && k[i] <= k[i - 1]) throw DomainError("knots must be strictly increasing");
            }
        }
        std::sort(active_.begin(), active_.end());
        if (std::adjacent_find(active_.begin(), active_.end()) != active_.end())
            throw DomainError("duplicate active index");
        const int d = static_cast<int>(n_coefs());
        for (int i : active_)
            if (i < 1 || i > d) throw DomainError("active index out of range");
    }

    static ModelSpec ingarch(EmissionFamily family, int p, int q) {
        std::vector<int> act(static_cast<std::size_t>(std::max(p, 0) + std::max(q, 0)));
        std::iota(act.begin(), act.end(), 1);
        return ModelSpec(family, IngarchForm{p, q}, std::move(act));
    }

    static ModelSpec knot(EmissionFamily family, std::vector<int> knots, bool with_feedback = true) {
        const std::size_t d = 1 + (with_feedback ? 1 : 0) + knots.size();
        std::vector<int> act(d);
        std::iota(act.begin(), act.end(), 1);
        return ModelSpec(family, KnotForm{std::move(knots), with_feedback}, std::move(act));
    }

    const EmissionFamily& family() const { return family_; }
    const DynamicForm& form() const { return form_; }
    const std::vector<int>& active() const { return active_; }

    const IngarchForm* as_ingarch() const { return std::get_if<IngarchForm>(&form_); }
    const KnotForm* as_knot() const { return std::get_if<KnotForm>(&form_); }

    /// Number of lag coefficients alpha_1..alpha_p (1 for the knot form).
    std::size_t n_lags() const {
        if (const auto* g = as_ingarch()) return static_cast<std::size_t>(g->p);
        return 1;
    }
    /// Number of feedback coefficients beta_1..beta_q (0 or 1 for the knot form).
    std::size_t n_feedback() const {
        if (const auto* g = as_ingarch()) return static_cast<std::size_t>(g->q);
        return as_knot()->with_feedback ? 1 : 0;
    }
    std::size_t n_knots() const {
        if (const auto* k = as_knot()) return k->knots.size();
        return 0;
    }
    /// d: number of non-intercept coefficients.
    std::size_t n_coefs() const { return n_lags() + n_feedback() + n_knots(); }
    /// 1 + d: length of the flat parameter vector.
    std::size_t n_params() const { return 1 + n_coefs(); }
    /// |m|: number of free non-intercept coefficients.
    std::size_t dim() const { return active_.size(); }

    bool is_active(std::size_t flat_index) const {
        if (flat_index == 0) return true;
        return std::binary_search(active_.begin(), active_.end(), static_cast<int>(flat_index));
    }

    bool full_active() const { return active_.size() == n_coefs(); }

    /// Flat positions of the free parameters: 0 (intercept) then `active`.
    std::vector<std::size_t> free_indices() const {
        std::vector<std::size_t> idx{0};
        for (int i : active_) idx.push_back(static_cast<std::size_t>(i));
        return idx;
    }

    std::string descriptor() const {
        std::string s;
        if (const auto* g = as_ingarch()) {
            s = "INGARCH(" + std::to_string(g->p) + "," + std::to_string(g->q) + ")";
        } else {
            const auto& k = *as_knot();
            s = "KNOT{";
            for (std::size_t i = 0; i < k.knots.size(); ++i) {
                if (i) s += ",";
                s += std::to_string(k.knots[i]);
            }
            s += "}";
            if (!k.with_feedback) s += "/nofb";
        }
        if (!full_active()) {
            s += "[";
            for (std::size_t i = 0; i < active_.size(); ++i) {
                if (i) s += ",";
                s += std::to_string(active_[i]);
            }
            s += "]";
        }
        return s;
    }

    /// Names of the flat parameters, e.g. alpha0, alpha1, beta1, gamma1.
    std::vector<std::string> param_names() const {
        std::vector<std::string> names{"alpha0"};
        for (std::size_t i = 1; i <= n_lags(); ++i) names.push_back("alpha" + std::to_string(i));
        for (std::size_t j = 1; j <= n_feedback(); ++j) {
            names.push_back(as_knot() ? std::string("alpha2") : "beta" + std::to_string(j));
        }
        for (std::size_t k = 1; k <= n_knots(); ++k) names.push_back("gamma" + std::to_string(k));
        return names;
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

private:
    EmissionFamily family_;
    DynamicForm form_;
    std::vector<int> active_;
};

/// theta: intercept, lag coefficients in lag order, feedback coefficients,
/// knot coefficients in knot order. For the knot form `alphas` holds alpha_1
/// and `betas` holds the lambda_{t-1} coefficient when present.
struct ParamVector {
    double alpha0 = 1.0;
    std::vector<double> alphas;
    std::vector<double> betas;
    std::vector<double> knot_coefs;

    std::size_t size() const { return 1 + alphas.size() + betas.size() + knot_coefs.size(); }

    double coef_sum() const {
        double s = 0.0;
        for (double a : alphas) s += a;
        for (double b : betas) s += b;
        for (double g : knot_coefs) s += g;
        return s;
    }

    std::vector<double> flat() const {
        std::vector<double> v{alpha0};
        v.insert(v.end(), alphas.begin(), alphas.end());
        v.insert(v.end(), betas.begin(), betas.end());
        v.insert(v.end(), knot_coefs.begin(), knot_coefs.end());
        return v;
    }

    static ParamVector from_flat(const ModelSpec& spec, std::span<const double> v) {
        if (v.size() != spec.n_params())
            throw ConstraintViolation("shape: expected " + std::to_string(spec.n_params()) +
                                      " parameters, got " + std::to_string(v.size()));
        ParamVector th;
        th.alpha0 = v[0];
        auto it = v.begin() + 1;
        th.alphas.assign(it, it + static_cast<std::ptrdiff_t>(spec.n_lags()));
        it += static_cast<std::ptrdiff_t>(spec.n_lags());
        th.betas.assign(it, it + static_cast<std::ptrdiff_t>(spec.n_feedback()));
        it += static_cast<std::ptrdiff_t>(spec.n_feedback());
        th.knot_coefs.assign(it, v.end());
        return th;
    }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

/// 1 - (sum of all non-intercept coefficients).
inline double stationarity_margin(const ParamVector& theta) { return 1.0 - theta.coef_sum(); }

/// Stationarity margin of a flat vector (index 0 is the intercept).
inline double stationarity_margin(std::span<const double> flat) {
    double s = 0.0;
    for (std::size_t i = 1; i < flat.size(); ++i) s += flat[i];
    return 1.0 - s;
}

/// True iff (a+b)^2 + a^2/r < 1, the sufficient condition for a finite second
/// moment of a contracting NB model with Lipschitz constants a (in y) and b
/// (in lambda).
inline bool moment_condition_nb(double a, double b, int r) {
    if (a < 0.0 || b < 0.0) throw DomainError("Lipschitz constants must be non-negative");
    if (r < 1) throw DomainError("r must be >= 1");
    if (a + b >= 1.0) throw ContractionViolation("a + b must be < 1");
    return (a + b) * (a + b) + a * a / r < 1.0;
}

/// Lipschitz constants (a, b) of a knot-form parameter: a = alpha1 + sum gamma_k,
/// b = feedback coefficient.
inline std::pair<double, double> knot_lipschitz(const ParamVector& theta) {
    double a = 0.0;
    for (double v : theta.alphas) a += v;
    for (double v : theta.knot_coefs) a += v;
    double b = 0.0;
    for (double v : theta.betas) b += v;
    return {a, b};
}

namespace detail {

/// One linear regressor (Y_{t-lag} - xi)^+ attached to flat parameter `param`.
struct Regressor {
    std::size_t param;
    int lag;
    int xi;
};

/// Flat-layout description of the recursion, shared by the mean path,
/// the simulator and the constraint builder.
struct Recursion {
    std::vector<Regressor> regressors;
    std::vector<std::size_t> feedback;  // feedback[j] multiplies lambda_{t-j-1}
    std::size_t n_params = 1;
    int max_lag = 0;
    bool bernoulli = false;

    explicit Recursion(const ModelSpec& spec)
        : n_params(spec.n_params()), bernoulli(spec.family().is_bernoulli()) {
        std::size_t pos = 1;
        for (std::size_t i = 1; i <= spec.n_lags(); ++i)
            regressors.push_back({pos++, static_cast<int>(i), 0});
        for (std::size_t j = 0; j < spec.n_feedback(); ++j) feedback.push_back(pos++);
        if (const auto* k = spec.as_knot())
            for (int xi : k->knots) regressors.push_back({pos++, 1, xi});
        for (const auto& r : regressors) max_lag = std::max(max_lag, r.lag);
        max_lag = std::max(max_lag, static_cast<int>(feedback.size()));
    }

    double feedback_sum(std::span<const double> flat) const {
        double s = 0.0;
        for (std::size_t p : feedback) s += flat[p];
        return s;
    }

    /// Zero-data fixed point alpha0 / (1 - sum of feedback coefficients).
    double fixed_point(std::span<const double> flat) const {
        return flat[0] / (1.0 - feedback_sum(flat));
    }

    /// Worst-case conditional mean over binary histories.
    double bernoulli_bound(std::span<const double> flat) const {
        double num = flat[0];
        for (const auto& r : regressors) num += flat[r.param] * knot_basis(1, r.xi);
        return num / (1.0 - feedback_sum(flat));
    }

    /// Coefficient vector a of the linear constraint a.theta <= c that keeps
    /// the binary worst-case mean below one: alpha0 + sum w_i theta_i + sum beta_j.
    std::vector<double> bernoulli_weights() const {
        std::vector<double> a(n_params, 0.0);
        a[0] = 1.0;
        for (const auto& r : regressors) a[r.param] = knot_basis(1, r.xi);
        for (std::size_t p : feedback) a[p] = 1.0;
        return a;
    }
};

}  // namespace detail

struct ValidatedPair {
    ModelSpec spec;
    ParamVector theta;
};

/// Checks every parameter invariant for `spec`; throws ConstraintViolation
/// naming the first one that fails.
inline ValidatedPair validate(const ModelSpec& spec, const ParamVector& theta) {
    if (theta.alphas.size() != spec.n_lags() || theta.betas.size() != spec.n_feedback() ||
        theta.knot_coefs.size() != spec.n_knots())
        throw ConstraintViolation("shape");
    const auto flat = theta.flat();
    for (double v : flat)
        if (!std::isfinite(v)) throw ConstraintViolation("finite");
    if (theta.alpha0 < kLowerMean) throw ConstraintViolation("intercept_lower_bound");
    for (std::size_t i = 1; i < flat.size(); ++i) {
        if (flat[i] < 0.0) throw ConstraintViolation("nonnegativity");
        if (!spec.is_active(i) && flat[i] != 0.0) throw ConstraintViolation("inactive_nonzero");
    }
    // Small slack absorbs summation-order rounding of projected iterates.
    if (stationarity_margin(theta) < kStationarityMargin - 1e-12) throw ConstraintViolation("stationarity");
    if (spec.family().is_bernoulli()) {
        const detail::Recursion rec(spec);
        if (!(rec.bernoulli_bound(flat) < 1.0)) throw ConstraintViolation("bernoulli_mean_bound");
    }
    return {spec, theta};
}

struct MeanPath {
    std::vector<double> lambdas;
    /// Column t holds d lambda_t / d theta over the full flat layout; empty
    /// unless gradients were requested.
    Eigen::MatrixXd grads;
    /// Set when a Bernoulli mean had to be clamped into [c, 1 - c].
    bool clamped = false;
};

namespace detail {

/// Mean recursion on a flat parameter vector with no validation. Pre-sample
/// counts are zero and pre-sample means sit at the zero-data fixed point.
inline MeanPath mean_path(const Recursion& rec, std::span<const double> flat, std::span<const std::int64_t> y,
                          bool want_grads) {
    const std::size_t n = y.size();
    const std::size_t dp = rec.n_params;
    MeanPath out;
    out.lambdas.resize(n);

    const double fb_sum = rec.feedback_sum(flat);
    const double lam0 = flat[0] / (1.0 - fb_sum);
    Eigen::VectorXd grad0;
    if (want_grads) {
        out.grads.resize(static_cast<Eigen::Index>(dp), static_cast<Eigen::Index>(n));
        grad0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dp));
        grad0[0] = 1.0 / (1.0 - fb_sum);
        for (std::size_t p : rec.feedback)
            grad0[static_cast<Eigen::Index>(p)] = flat[0] / ((1.0 - fb_sum) * (1.0 - fb_sum));
    }

    auto y_at = [&](std::ptrdiff_t s) -> std::int64_t { return s < 0 ? 0 : y[static_cast<std::size_t>(s)]; };
    auto lam_at = [&](std::ptrdiff_t s) -> double { return s < 0 ? lam0 : out.lambdas[static_cast<std::size_t>(s)]; };

    for (std::size_t tu = 0; tu < n; ++tu) {
        const auto t = static_cast<std::ptrdiff_t>(tu);
        double lam = flat[0];
        for (const auto& r : rec.regressors) lam += flat[r.param] * knot_basis(y_at(t - r.lag), r.xi);
        for (std::size_t j = 0; j < rec.feedback.size(); ++j)
            lam += flat[rec.feedback[j]] * lam_at(t - static_cast<std::ptrdiff_t>(j) - 1);

        bool clamped = false;
        if (rec.bernoulli && lam > 1.0 - kLowerMean) {
            lam = 1.0 - kLowerMean;
            clamped = true;
        }
        if (lam < kLowerMean) {
            lam = kLowerMean;
            clamped = true;
        }
        out.clamped = out.clamped || clamped;
        out.lambdas[tu] = lam;

        if (want_grads) {
            auto g = out.grads.col(static_cast<Eigen::Index>(tu));
            if (clamped) {
                g.setZero();
                continue;
            }
            g.setZero();
            g[0] = 1.0;
            for (const auto& r : rec.regressors)
                g[static_cast<Eigen::Index>(r.param)] += knot_basis(y_at(t - r.lag), r.xi);
            for (std::size_t j = 0; j < rec.feedback.size(); ++j) {
                const std::ptrdiff_t s = t - static_cast<std::ptrdiff_t>(j) - 1;
                const double beta = flat[rec.feedback[j]];
                g[static_cast<Eigen::Index>(rec.feedback[j])] += lam_at(s);
                if (s < 0)
                    g += beta * grad0;
                else
                    g += beta * out.grads.col(static_cast<Eigen::Index>(s));
            }
        }
    }
    return out;
}

}  // namespace detail

/// Conditional means lambda_1..lambda_n (and optionally their gradients) of a
/// validated pair on the observed series.
inline MeanPath lambda_path(const ModelSpec& spec, const ParamVector& theta, std::span<const std::int64_t> y,
                            bool want_grads) {
    validate(spec, theta);
    if (y.empty()) throw DomainError("series must have at least one observation");
    const detail::Recursion rec(spec);
    const auto flat = theta.flat();
    return detail::mean_path(rec, flat, y, want_grads);
}

}  // namespace countsel
