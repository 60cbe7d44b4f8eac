#pragma once

// Penalized quasi-likelihood model selection over finite collections:
//   C_n(m) = -2 L_n(theta_hat(m)) + kappa_n |m|,   m_hat = argmin C_n(m).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "countsel/errors.hpp"
#include "countsel/model.hpp"
#include "countsel/parallel.hpp"
#include "countsel/qmle.hpp"

namespace countsel {

enum class PenaltyKind { LogN, PowerN, Custom };

/// Penalty sequence kappa_n. Admissible penalties grow to infinity while
/// staying below n; log n and n^delta (0 < delta < 1) both qualify for the
/// finite-order models here.
class Penalty {
public:
    static Penalty log_n() { return Penalty(PenaltyKind::LogN, 0.0, {}, "logn"); }

    static Penalty power_n(double delta) {
        if (!(delta > 0.0 && delta < 1.0)) throw DomainError("power penalty exponent must lie in (0,1)");
        return Penalty(PenaltyKind::PowerN, delta, {}, "pow:" + format_delta(delta));
    }

    static Penalty custom(std::string name, std::function<double(std::size_t)> fn) {
        return Penalty(PenaltyKind::Custom, 0.0, std::move(fn), "custom:" + name);
    }

    /// Parses "logn", "pow:<delta>" or "pow:<a>/<b>".
    static Penalty parse(std::string_view text) {
        if (text == "logn" || text == "log" || text == "bic") return log_n();
        if (text.substr(0, 4) == "pow:") {
            const std::string arg(text.substr(4));
            double delta = 0.0;
            try {
                std::size_t pos = 0;
                if (const auto slash = arg.find('/'); slash != std::string::npos) {
                    const double num = std::stod(arg.substr(0, slash), &pos);
                    if (pos != slash) throw std::invalid_argument("bad numerator");
                    const std::string den_s = arg.substr(slash + 1);
                    const double den = std::stod(den_s, &pos);
                    if (pos != den_s.size()) throw std::invalid_argument("bad denominator");
                    delta = num / den;
                } else {
                    delta = std::stod(arg, &pos);
                    if (pos != arg.size()) throw std::invalid_argument("trailing characters");
                }
            } catch (const std::logic_error&) {
                throw DomainError("cannot parse penalty '" + std::string(text) + "'");
            }
            return power_n(delta);
        }
        throw DomainError("unknown penalty '" + std::string(text) + "'");
    }

    PenaltyKind kind() const { return kind_; }
    double delta() const { return delta_; }
    const std::string& descriptor() const { return name_; }

    double value(std::size_t n) const {
        switch (kind_) {
            case PenaltyKind::LogN:
                if (n < 2) throw DomainError("log n penalty needs n >= 2");
                return std::log(static_cast<double>(n));
            case PenaltyKind::PowerN: return std::pow(static_cast<double>(n), delta_);
            case PenaltyKind::Custom: {
                const double v = fn_(n);
                if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("custom penalty must be positive");
                return v;
            }
        }
        throw DomainError("unknown penalty");
    }

private:
    Penalty(PenaltyKind kind, double delta, std::function<double(std::size_t)> fn, std::string name)
        : kind_(kind), delta_(delta), fn_(std::move(fn)), name_(std::move(name)) {}

    static std::string format_delta(double delta) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", delta);
        return buf;
    }

    PenaltyKind kind_;
    double delta_;
    std::function<double(std::size_t)> fn_;
    std::string name_;
};

inline double penalty_value(const Penalty& p, std::size_t n) { return p.value(n); }

/// -2 loglik + kappa dim.
inline double criterion(double loglik, std::size_t dim, double kappa) {
    return -2.0 * loglik + kappa * static_cast<double>(dim);
}

/// All INGARCH(p,q) with contiguous lags, q in the outer loop and p inner.
inline std::vector<ModelSpec> enumerate_ingarch(const EmissionFamily& family, int p_max, int q_max) {
    if (p_max < 0 || q_max < 0) throw DomainError("maximal orders must be non-negative");
    std::vector<ModelSpec> out;
    for (int q = 0; q <= q_max; ++q)
        for (int p = 0; p <= p_max; ++p) out.push_back(ModelSpec::ingarch(family, p, q));
    return out;
}

/// Knot models with NB(r) emission and every size-K subset of `candidates`
/// as knot set, K = 0..k_max; subsets in lexicographic order within each K.
inline std::vector<ModelSpec> enumerate_knots(int r, int k_max, const std::vector<int>& candidates,
                                              bool with_feedback = true) {
    if (k_max < 0 || static_cast<std::size_t>(k_max) > candidates.size())
        throw DomainError("k_max must lie in [0, number of candidates]");
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i] <= candidates[i - 1]) throw DomainError("knot candidates must be strictly increasing");
    const auto family = EmissionFamily::negbin(r);
    std::vector<ModelSpec> out;
    std::vector<int> pick;
    std::function<void(std::size_t, int)> rec = [&](std::size_t from, int left) {
        if (left == 0) {
            out.push_back(ModelSpec::knot(family, pick, with_feedback));
            return;
        }
        for (std::size_t i = from; i + static_cast<std::size_t>(left) <= candidates.size(); ++i) {
            pick.push_back(candidates[i]);
            rec(i + 1, left - 1);
            pick.pop_back();
        }
    };
    for (int k = 0; k <= k_max; ++k) rec(0, k);
    return out;
}

/// Parsimony order used for ties: (p,q) or knot set lexicographically.
inline bool structural_less(const ModelSpec& a, const ModelSpec& b) {
    const auto* ga = a.as_ingarch();
    const auto* gb = b.as_ingarch();
    if (ga && gb) {
        if (ga->p != gb->p) return ga->p < gb->p;
        if (ga->q != gb->q) return ga->q < gb->q;
        return a.active() < b.active();
    }
    if (!ga && !gb) {
        const auto& ka = *a.as_knot();
        const auto& kb = *b.as_knot();
        if (ka.knots != kb.knots) return ka.knots < kb.knots;
        if (ka.with_feedback != kb.with_feedback) return !ka.with_feedback;
        return a.active() < b.active();
    }
    return ga != nullptr;
}

/// Fits of every model of a collection on one series; penalty-independent.
struct FittedCollection {
    std::vector<ModelSpec> models;
    std::vector<std::optional<FitResult>> fits;
    std::vector<std::string> errors;  // empty when the fit succeeded
    std::size_t n = 0;
};

inline FittedCollection fit_collection(const std::vector<ModelSpec>& collection, std::span<const std::int64_t> y,
                                       const FitOptions& opts = {}, unsigned threads = 1) {
    if (collection.empty()) throw DomainError("model collection is empty");
    FittedCollection fc;
    fc.models = collection;
    fc.fits.resize(collection.size());
    fc.errors.resize(collection.size());
    fc.n = y.size();
    parallel_for(collection.size(), threads, [&](std::size_t i) {
        try {
            fc.fits[i] = fit(collection[i], y, opts);
        } catch (const Error& e) {
            fc.errors[i] = e.what();
        }
    });
    return fc;
}

struct SelectionRow {
    ModelSpec model;
    std::size_t dim = 0;
    double loglik = -std::numeric_limits<double>::infinity();
    double criterion = std::numeric_limits<double>::infinity();
    bool failed = false;
    std::string failure;
    std::optional<FitResult> fit;
};

struct SelectionResult {
    std::vector<SelectionRow> table;
    std::size_t chosen = 0;
    Penalty penalty_used = Penalty::log_n();
    double kappa = 0.0;
    std::size_t n = 0;

    const SelectionRow& chosen_row() const { return table[chosen]; }
    const ModelSpec& chosen_model() const { return table[chosen].model; }
};

/// Index of the minimal criterion; ties go to the smaller dimension, then to
/// the structurally smaller model. Returns table.size() if every row is +inf.
inline std::size_t argmin_criterion(const std::vector<SelectionRow>& table) {
    std::size_t best = table.size();
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i].failed || !std::isfinite(table[i].criterion)) continue;
        if (best == table.size()) {
            best = i;
            continue;
        }
        const auto& a = table[i];
        const auto& b = table[best];
        if (a.criterion < b.criterion ||
            (a.criterion == b.criterion &&
             (a.dim < b.dim || (a.dim == b.dim && structural_less(a.model, b.model)))))
            best = i;
    }
    return best;
}

inline SelectionResult select_from_fits(const FittedCollection& fc, const Penalty& penalty) {
    SelectionResult res;
    res.penalty_used = penalty;
    res.n = fc.n;
    res.kappa = penalty.value(fc.n);
    for (std::size_t i = 0; i < fc.models.size(); ++i) {
        SelectionRow row{.model = fc.models[i], .dim = fc.models[i].dim(), .failure = {}, .fit = {}};
        if (fc.fits[i]) {
            row.fit = fc.fits[i];
            row.loglik = fc.fits[i]->loglik;
            row.criterion = criterion(row.loglik, row.dim, res.kappa);
        } else {
            row.failed = true;
            row.failure = fc.errors[i];
        }
        res.table.push_back(std::move(row));
    }
    res.chosen = argmin_criterion(res.table);
    if (res.chosen == res.table.size()) throw AllFitsFailed("every model in the collection failed to fit");
    return res;
}

/// Fits every model and returns the penalized-criterion table with its argmin.
inline SelectionResult select(const std::vector<ModelSpec>& collection, std::span<const std::int64_t> y,
                              const Penalty& penalty, const FitOptions& opts = {}, unsigned threads = 1) {
    const auto n = y.size();
    std::size_t max_dim = 0;
    for (const auto& m : collection) max_dim = std::max(max_dim, m.dim());
    if (n < max_dim + 1) throw DomainError("series too short for the largest model");
    return select_from_fits(fit_collection(collection, y, opts, threads), penalty);
}

}  // namespace countsel
