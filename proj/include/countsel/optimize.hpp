#pragma once

// Projected ascent over {x >= lower} intersected with at most two half-spaces
// {a.x <= c}, a >= 0. Directions come from a caller-supplied positive
// semi-definite curvature matrix (Newton/scoring), with a projected-gradient
// fallback when the scaled step fails the Armijo test along the projection arc.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace countsel::optim {

struct HalfSpace {
    Eigen::VectorXd a;  // non-negative weights
    double c = 0.0;
};

class Feasible {
public:
    Feasible() = default;
    Feasible(Eigen::VectorXd lower, std::vector<HalfSpace> hs) : lower_(std::move(lower)), hs_(std::move(hs)) {
        if (hs_.size() > 2) throw std::invalid_argument("at most two half-spaces supported");
        for (const auto& h : hs_) {
            if (h.a.size() != lower_.size()) throw std::invalid_argument("half-space dimension mismatch");
            if ((h.a.array() < 0.0).any()) throw std::invalid_argument("half-space weights must be non-negative");
            if (h.a.dot(lower_) > h.c) throw std::invalid_argument("empty feasible set");
        }
    }

    const Eigen::VectorXd& lower() const { return lower_; }
    const std::vector<HalfSpace>& halfspaces() const { return hs_; }

    bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const {
        if (((x - lower_).array() < -tol).any()) return false;
        for (const auto& h : hs_)
            if (h.a.dot(x) > h.c + tol) return false;
        return true;
    }

    /// Euclidean projection.
    Eigen::VectorXd project(const Eigen::VectorXd& z) const {
        if (hs_.empty()) return z.cwiseMax(lower_);
        if (hs_.size() == 1) return project_one(z, hs_[0]);
        const auto& h2 = hs_[1];
        auto inner = [&](double mu2) { return project_one(z - mu2 * h2.a, hs_[0]); };
        Eigen::VectorXd x = inner(0.0);
        if (h2.a.dot(x) <= h2.c) return x;
        double lo = 0.0, hi = 1.0;
        while (h2.a.dot(inner(hi)) > h2.c) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e300) throw std::runtime_error("projection failed to bracket");
        }
        for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (h2.a.dot(inner(mid)) > h2.c)
                lo = mid;
            else
                hi = mid;
        }
        return inner(hi);
    }

private:
    Eigen::VectorXd project_one(const Eigen::VectorXd& z, const HalfSpace& h) const {
        Eigen::VectorXd x = z.cwiseMax(lower_);
        if (h.a.dot(x) <= h.c) return x;
        auto at = [&](double mu) { return (z - mu * h.a).cwiseMax(lower_); };
        double lo = 0.0, hi = 1.0;
        while (h.a.dot(at(hi)) > h.c) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e300) throw std::runtime_error("projection failed to bracket");
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (h.a.dot(at(mid)) > h.c)
                lo = mid;
            else
                hi = mid;
        }
        // Exact solve on the active pattern of the bracket.
        x = at(hi);
        double num = -h.c, den = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (z[i] - hi * h.a[i] > lower_[i]) {
                num += h.a[i] * z[i];
                den += h.a[i] * h.a[i];
            } else {
                num += h.a[i] * lower_[i];
            }
        }
        if (den > 0.0) {
            const double mu = num / den;
            if (mu >= lo && mu <= hi) {
                Eigen::VectorXd xe = at(mu);
                if (h.a.dot(xe) <= h.c) return xe;
            }
        }
        return x;
    }

    Eigen::VectorXd lower_;
    std::vector<HalfSpace> hs_;
};

struct Evaluation {
    double value = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd grad;
    Eigen::MatrixXd curvature;  // PSD approximation of the negative Hessian
};

struct AscentOptions {
    double tol_grad = 1e-6;
    double tol_obj = 1e-9;
    int max_iter = 500;
    /// Multiplies the gradient before the projected-gradient norm is taken.
    double grad_scale = 1.0;
};

struct AscentResult {
    Eigen::VectorXd x;
    double value = -std::numeric_limits<double>::infinity();
    double grad_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Norm of P(x + scale * g) - x.
inline double projected_gradient_norm(const Feasible& set, const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                      double scale) {
    return (set.project(x + scale * g) - x).norm();
}

namespace detail {

/// Solves M d = g restricted to `free` coordinates, adding a ridge until the
/// Cholesky factorization succeeds; binding half-spaces are imposed as
/// equality constraints on the step when they would otherwise be crossed.
inline Eigen::VectorXd scaled_direction(const Eigen::MatrixXd& curv, const Eigen::VectorXd& g,
                                        const std::vector<Eigen::Index>& free,
                                        const std::vector<const HalfSpace*>& binding) {
    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd d = Eigen::VectorXd::Zero(g.size());
    if (k == 0) return d;
    Eigen::MatrixXd m(k, k);
    Eigen::VectorXd gf(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        gf[i] = g[free[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) = curv(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
    }
    const double scale = std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    double ridge = 1e-10 * scale;
    Eigen::LLT<Eigen::MatrixXd> llt;
    for (int attempt = 0; attempt < 12; ++attempt) {
        llt.compute(m + ridge * Eigen::MatrixXd::Identity(k, k));
        if (llt.info() == Eigen::Success) break;
        ridge *= 100.0;
    }
    if (llt.info() != Eigen::Success) return d;

    Eigen::VectorXd df = llt.solve(gf);
    // Active-set pass over binding half-spaces whose normal the step would cross.
    std::vector<Eigen::VectorXd> rows;
    for (const HalfSpace* h : binding) {
        Eigen::VectorXd af(k);
        for (Eigen::Index i = 0; i < k; ++i) af[i] = h->a[free[static_cast<std::size_t>(i)]];
        if (af.squaredNorm() > 0.0 && af.dot(df) > 0.0) rows.push_back(af);
    }
    if (!rows.empty()) {
        Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), k);
        for (std::size_t r = 0; r < rows.size(); ++r) a.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
        const Eigen::MatrixXd minv_at = llt.solve(a.transpose());
        const Eigen::MatrixXd s = a * minv_at;
        const Eigen::VectorXd mult = s.ldlt().solve(a * df);
        df -= minv_at * mult;
    }
    for (Eigen::Index i = 0; i < k; ++i) d[free[static_cast<std::size_t>(i)]] = df[i];
    return d;
}

}  // namespace detail

/// Maximizes `obj` over `set` starting from `x0`.
///
/// `obj.evaluate(x)` returns an Evaluation (value, gradient, curvature);
/// `obj.value(x)` returns the value alone. Convergence means the scaled
/// projected-gradient norm fell to tol_grad.
template <class Objective>
AscentResult projected_ascent(Objective& obj, const Feasible& set, const Eigen::VectorXd& x0,
                              const AscentOptions& opts) {
    AscentResult res;
    Eigen::VectorXd x = set.project(x0);
    Evaluation ev = obj.evaluate(x);
    if (!std::isfinite(ev.value)) {
        res.x = x;
        return res;
    }
    const double armijo = 1e-4;
    int stalls = 0;
    int it = 0;
    double gnorm = projected_gradient_norm(set, x, ev.grad, opts.grad_scale);

    for (; it < opts.max_iter; ++it) {
        if (gnorm <= opts.tol_grad) break;

        const auto& lo = set.lower();
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const bool at_bound = x[i] <= lo[i] + 1e-12 * (1.0 + std::abs(lo[i]));
            if (!(at_bound && ev.grad[i] <= 0.0)) free.push_back(i);
        }
        std::vector<const HalfSpace*> binding;
        for (const auto& h : set.halfspaces())
            if (h.a.dot(x) >= h.c - 1e-10) binding.push_back(&h);

        auto try_direction = [&](const Eigen::VectorXd& d, Eigen::VectorXd& xn, double& fn) {
            double t = 1.0;
            for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
                xn = set.project(x + t * d);
                const Eigen::VectorXd step = xn - x;
                if (step.norm() <= 1e-15 * (1.0 + x.norm())) return false;
                const double slope = ev.grad.dot(step);
                if (slope <= 0.0) continue;
                fn = obj.value(xn);
                if (std::isfinite(fn) && fn >= ev.value + armijo * slope) return true;
            }
            return false;
        };

        Eigen::VectorXd xn;
        double fn = ev.value;
        bool accepted = false;
        const Eigen::VectorXd dn = detail::scaled_direction(ev.curvature, ev.grad, free, binding);
        if (dn.allFinite() && dn.squaredNorm() > 0.0) accepted = try_direction(dn, xn, fn);
        if (!accepted) {
            const double tr = ev.curvature.diagonal().cwiseAbs().sum();
            const double eta = tr > 0.0 ? 1.0 / tr : 1.0;
            accepted = try_direction(eta * ev.grad, xn, fn);
        }
        if (!accepted) break;

        const double gain = fn - ev.value;
        x = xn;
        ev = obj.evaluate(x);
        gnorm = projected_gradient_norm(set, x, ev.grad, opts.grad_scale);
        if (gain <= opts.tol_obj * (1.0 + std::abs(ev.value))) {
            if (++stalls >= 25) {
                ++it;
                break;
            }
        } else {
            stalls = 0;
        }
    }
    res.x = x;
    res.value = ev.value;
    res.grad_norm = gnorm;
    res.iterations = it;
    res.converged = gnorm <= opts.tol_grad;
    return res;
}

}  // namespace countsel::optim
