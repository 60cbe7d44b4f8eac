#pragma once

// Poisson quasi-maximum likelihood for observation-driven count models:
// truncated quasi-log-likelihood, its score, a multi-start constrained
// maximizer, and the robust sandwich covariance J^-1 I J^-1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countsel/errors.hpp"
#include "countsel/model.hpp"
#include "countsel/optimize.hpp"

namespace countsel {

struct FitOptions {
    int n_starts = 5;
    double tol_grad = 1e-6;  // on the per-observation projected score
    double tol_obj = 1e-9;
    int max_iter = 500;
    bool sandwich = true;
};

struct Sandwich {
    // Full flat layout; rows/columns of inactive coefficients are zero.
    Eigen::MatrixXd J_hat;
    Eigen::MatrixXd I_hat;
    Eigen::MatrixXd Sigma_hat;
    Eigen::VectorXd std_errors;
    bool jittered = false;
};

struct FitResult {
    ParamVector theta_hat;
    double loglik = -std::numeric_limits<double>::infinity();
    double grad_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::size_t n_used = 0;
    int starts_converged = 0;
    /// Constant series fitted with a dynamic model; the optimum sits on the boundary.
    bool degenerate = false;
    std::optional<Sandwich> sandwich;
    /// Why the sandwich is absent when it was requested.
    std::string sandwich_error;
};

/// sum_t (Y_t log lambda_t - lambda_t).
inline double quasi_loglik_from_path(std::span<const double> lambdas, std::span<const std::int64_t> y) {
    double s = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double lam = lambdas[t];
        s += (y[t] == 0 ? 0.0 : static_cast<double>(y[t]) * std::log(lam)) - lam;
    }
    return s;
}

inline double quasi_loglik(const ModelSpec& spec, const ParamVector& theta, std::span<const std::int64_t> y) {
    const auto path = lambda_path(spec, theta, y, false);
    return quasi_loglik_from_path(path.lambdas, y);
}

/// Score sum_t (Y_t / lambda_t - 1) d lambda_t / d theta on the free
/// coordinates (intercept first, then `spec.active()` in order).
inline Eigen::VectorXd quasi_score(const ModelSpec& spec, const ParamVector& theta, std::span<const std::int64_t> y) {
    const auto path = lambda_path(spec, theta, y, true);
    const auto free = spec.free_indices();
    Eigen::VectorXd score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free.size()));
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double w = static_cast<double>(y[t]) / path.lambdas[t] - 1.0;
        for (std::size_t i = 0; i < free.size(); ++i)
            score[static_cast<Eigen::Index>(i)] +=
                w * path.grads(static_cast<Eigen::Index>(free[i]), static_cast<Eigen::Index>(t));
    }
    return score;
}

namespace detail {

inline Eigen::MatrixXd free_rows(const Eigen::MatrixXd& grads, const std::vector<std::size_t>& free) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(free.size()), grads.cols());
    for (std::size_t i = 0; i < free.size(); ++i)
        g.row(static_cast<Eigen::Index>(i)) = grads.row(static_cast<Eigen::Index>(free[i]));
    return g;
}

/// Quasi-log-likelihood as a function of the free coordinates.
class QuasiObjective {
public:
    QuasiObjective(const ModelSpec& spec, std::span<const std::int64_t> y)
        : rec_(spec), y_(y), free_(spec.free_indices()), n_params_(spec.n_params()) {}

    std::vector<double> full(const Eigen::VectorXd& x) const {
        std::vector<double> flat(n_params_, 0.0);
        for (std::size_t i = 0; i < free_.size(); ++i) flat[free_[i]] = x[static_cast<Eigen::Index>(i)];
        return flat;
    }

    double value(const Eigen::VectorXd& x) const {
        const auto flat = full(x);
        const auto path = mean_path(rec_, flat, y_, false);
        return quasi_loglik_from_path(path.lambdas, y_);
    }

    optim::Evaluation evaluate(const Eigen::VectorXd& x) const {
        const auto flat = full(x);
        const auto path = mean_path(rec_, flat, y_, true);
        const Eigen::MatrixXd g = free_rows(path.grads, free_);
        const auto n = static_cast<Eigen::Index>(y_.size());
        Eigen::VectorXd resid(n), weight(n);
        for (Eigen::Index t = 0; t < n; ++t) {
            const double lam = path.lambdas[static_cast<std::size_t>(t)];
            const double yt = static_cast<double>(y_[static_cast<std::size_t>(t)]);
            resid[t] = yt / lam - 1.0;
            weight[t] = yt / (lam * lam);
        }
        optim::Evaluation ev;
        ev.value = quasi_loglik_from_path(path.lambdas, y_);
        ev.grad = g * resid;
        // Observed curvature of the Poisson contrast; exact when lambda is
        // linear in theta (no feedback).
        ev.curvature = g * weight.asDiagonal() * g.transpose();
        return ev;
    }

    const Recursion& recursion() const { return rec_; }
    const std::vector<std::size_t>& free() const { return free_; }

private:
    Recursion rec_;
    std::span<const std::int64_t> y_;
    std::vector<std::size_t> free_;
    std::size_t n_params_;
};

/// Constraint set on the free coordinates: intercept >= c, coefficients >= 0,
/// coefficient sum <= 1 - margin, and for binary data the worst-case mean
/// (alpha0 + sum w alpha) / (1 - sum beta) <= 1 - c written as a linear
/// inequality.
inline optim::Feasible feasible_set(const ModelSpec& spec) {
    const auto free = spec.free_indices();
    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd lower = Eigen::VectorXd::Zero(k);
    lower[0] = kLowerMean;
    std::vector<optim::HalfSpace> hs;
    if (k > 1) {
        optim::HalfSpace stat{Eigen::VectorXd::Ones(k), 1.0 - kStationarityMargin};
        stat.a[0] = 0.0;
        hs.push_back(stat);
    }
    if (spec.family().is_bernoulli()) {
        const Recursion rec(spec);
        const auto w = rec.bernoulli_weights();
        optim::HalfSpace bern{Eigen::VectorXd::Zero(k), 1.0 - kLowerMean};
        for (Eigen::Index i = 0; i < k; ++i) bern.a[i] = w[free[static_cast<std::size_t>(i)]];
        for (std::size_t p : rec.feedback)
            for (Eigen::Index i = 0; i < k; ++i)
                if (free[static_cast<std::size_t>(i)] == p) bern.a[i] = 1.0 - kLowerMean;
        hs.push_back(bern);
    }
    return optim::Feasible(lower, hs);
}

/// Radical inverse of `index` in `base` (van der Corput / Halton coordinate).
inline double radical_inverse(unsigned index, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (index > 0) {
        r += f * (index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

/// Deterministic starting points on the free coordinates. Start 0 is the
/// moment-matching point (each coefficient 0.1, intercept matching the
/// sample mean); the rest are Halton points of the coefficient simplex with
/// the intercept again matching the sample mean.
inline std::vector<Eigen::VectorXd> starting_points(const ModelSpec& spec, std::span<const std::int64_t> y,
                                                    int n_starts) {
    static constexpr std::array<unsigned, 12> primes{3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41};
    const std::size_t k = spec.dim();
    double ybar = 0.0;
    for (auto v : y) ybar += static_cast<double>(v);
    ybar /= static_cast<double>(y.size());

    std::vector<Eigen::VectorXd> starts;
    const auto make = [&](const std::vector<double>& coefs) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(k + 1));
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            x[static_cast<Eigen::Index>(i + 1)] = coefs[i];
            s += coefs[i];
        }
        x[0] = std::max(ybar * (1.0 - s), kLowerMean);
        return x;
    };

    std::vector<double> c0(k, k <= 9 ? 0.1 : 0.9 / static_cast<double>(k));
    starts.push_back(make(c0));
    if (k == 0) return starts;  // every start coincides
    for (int j = 1; j < n_starts; ++j) {
        const double mass = 0.05 + 0.85 * radical_inverse(static_cast<unsigned>(j), 2);
        std::vector<double> w(k);
        double ws = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            w[i] = 0.05 + radical_inverse(static_cast<unsigned>(j), primes[i % primes.size()]);
            ws += w[i];
        }
        for (auto& v : w) v *= mass / ws;
        starts.push_back(make(w));
    }
    return starts;
}

}  // namespace detail

/// Information matrices from gradient columns g_t (rows = coordinates):
/// J = (1/n) sum g g' / lambda, I = (1/n) sum (Y - lambda)^2 / lambda^2 g g'.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> information_matrices(const Eigen::MatrixXd& grads,
                                                                        std::span<const double> lambdas,
                                                                        std::span<const std::int64_t> y) {
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::VectorXd wj(n), wi(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double lam = lambdas[static_cast<std::size_t>(t)];
        const double e = static_cast<double>(y[static_cast<std::size_t>(t)]) - lam;
        wj[t] = 1.0 / lam;
        wi[t] = e * e / (lam * lam);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd j = inv_n * (grads * wj.asDiagonal() * grads.transpose());
    Eigen::MatrixXd i = inv_n * (grads * wi.asDiagonal() * grads.transpose());
    // Symmetrize away rounding.
    j = 0.5 * (j + j.transpose()).eval();
    i = 0.5 * (i + i.transpose()).eval();
    return {j, i};
}

/// Sigma = J^-1 I J^-1 and standard errors sqrt(diag(Sigma) / n).
/// Throws SingularInformation when cond(J) > 1e12.
inline Sandwich sandwich_from_information(const Eigen::MatrixXd& j, const Eigen::MatrixXd& i, std::size_t n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) throw SingularInformation("information matrix is singular or ill-conditioned");

    const auto k = j.rows();
    Sandwich s;
    Eigen::LLT<Eigen::MatrixXd> llt(j);
    if (llt.info() != Eigen::Success) {
        llt.compute(j + 1e-10 * Eigen::MatrixXd::Identity(k, k));
        s.jittered = true;
        if (llt.info() != Eigen::Success) throw SingularInformation("information matrix is not positive definite");
    }
    const Eigen::MatrixXd jinv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    s.J_hat = j;
    s.I_hat = i;
    s.Sigma_hat = jinv * i * jinv;
    s.Sigma_hat = 0.5 * (s.Sigma_hat + s.Sigma_hat.transpose()).eval();
    s.std_errors = (s.Sigma_hat.diagonal().cwiseMax(0.0) / static_cast<double>(n)).cwiseSqrt();
    return s;
}

/// Attaches the sandwich covariance at fit.theta_hat; matrices are embedded
/// in the full flat layout.
inline FitResult sandwich(const ModelSpec& spec, FitResult fit, std::span<const std::int64_t> y) {
    if (!fit.converged) throw OptimFailure("sandwich requires a converged fit");
    const auto path = lambda_path(spec, fit.theta_hat, y, true);
    const auto free = spec.free_indices();
    const Eigen::MatrixXd g = detail::free_rows(path.grads, free);
    const auto [j, i] = information_matrices(g, path.lambdas, y);
    Sandwich reduced = sandwich_from_information(j, i, y.size());

    const auto d = static_cast<Eigen::Index>(spec.n_params());
    Sandwich full;
    full.jittered = reduced.jittered;
    full.J_hat = Eigen::MatrixXd::Zero(d, d);
    full.I_hat = Eigen::MatrixXd::Zero(d, d);
    full.Sigma_hat = Eigen::MatrixXd::Zero(d, d);
    full.std_errors = Eigen::VectorXd::Zero(d);
    for (std::size_t a = 0; a < free.size(); ++a) {
        const auto fa = static_cast<Eigen::Index>(free[a]);
        const auto ra = static_cast<Eigen::Index>(a);
        full.std_errors[fa] = reduced.std_errors[ra];
        for (std::size_t b = 0; b < free.size(); ++b) {
            const auto fb = static_cast<Eigen::Index>(free[b]);
            const auto rb = static_cast<Eigen::Index>(b);
            full.J_hat(fa, fb) = reduced.J_hat(ra, rb);
            full.I_hat(fa, fb) = reduced.I_hat(ra, rb);
            full.Sigma_hat(fa, fb) = reduced.Sigma_hat(ra, rb);
        }
    }
    fit.sandwich = std::move(full);
    fit.sandwich_error.clear();
    return fit;
}

/// PQMLE of `spec` on `y`: multi-start projected ascent over the feasible
/// set, returning the best converged start. Throws OptimFailure when no
/// start converges.
inline FitResult fit(const ModelSpec& spec, std::span<const std::int64_t> y, const FitOptions& opts = {}) {
    if (y.size() < spec.dim() + 1)
        throw DomainError("need at least " + std::to_string(spec.dim() + 1) + " observations");
    for (auto v : y)
        if (v < 0) throw DomainError("counts must be non-negative");
    if (spec.family().is_bernoulli())
        for (auto v : y)
            if (v > 1) throw DomainError("binary family requires 0/1 data");

    detail::QuasiObjective obj(spec, y);
    const auto set = detail::feasible_set(spec);
    optim::AscentOptions aopts;
    aopts.tol_grad = opts.tol_grad;
    aopts.tol_obj = opts.tol_obj;
    aopts.max_iter = opts.max_iter;
    aopts.grad_scale = 1.0 / static_cast<double>(y.size());

    FitResult best;
    bool have = false;
    for (const auto& x0 : detail::starting_points(spec, y, std::max(opts.n_starts, 1))) {
        const auto res = optim::projected_ascent(obj, set, x0, aopts);
        if (!res.converged) continue;
        ++best.starts_converged;
        if (!have || res.value > best.loglik) {
            have = true;
            best.theta_hat = ParamVector::from_flat(spec, obj.full(res.x));
            best.loglik = res.value;
            best.grad_norm = res.grad_norm;
            best.iterations = res.iterations;
        }
    }
    if (!have) throw OptimFailure("no start converged for " + spec.descriptor());
    best.converged = true;
    best.n_used = y.size();
    best.degenerate = spec.dim() > 0 && std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();

    if (opts.sandwich) {
        try {
            best = sandwich(spec, std::move(best), y);
        } catch (const SingularInformation& e) {
            best.sandwich_error = e.what();
        }
    }
    return best;
}

}  // namespace countsel
