#pragma once

// Seeded Monte Carlo replications of the selection procedure and coverage
// studies of sandwich confidence intervals.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "countsel/errors.hpp"
#include "countsel/model.hpp"
#include "countsel/parallel.hpp"
#include "countsel/qmle.hpp"
#include "countsel/select.hpp"
#include "countsel/simulate.hpp"

namespace countsel {

/// Index into a FrequencyTable row. For knot experiments the same slots hold
/// K_hat < K*, K_hat = K*, K_hat > K*.
enum class OutcomeClass : int { Underfit = 0, Exact = 1, OverOrWrong = 2 };

inline OutcomeClass classify_outcome(const ModelSpec& chosen, const ModelSpec& truth) {
    if (chosen.form().index() != truth.form().index())
        throw FamilyMismatch("chosen and true models belong to different dynamic forms");
    if (truth.as_knot()) {
        const auto kc = chosen.n_knots();
        const auto kt = truth.n_knots();
        if (kc < kt) return OutcomeClass::Underfit;
        if (kc == kt) return OutcomeClass::Exact;
        return OutcomeClass::OverOrWrong;
    }
    if (chosen.form() == truth.form() && chosen.active() == truth.active()) return OutcomeClass::Exact;
    if (chosen.dim() < truth.dim()) return OutcomeClass::Underfit;
    return OutcomeClass::OverOrWrong;
}

struct IngarchCollection {
    int p_max = 5;
    int q_max = 5;
};

struct KnotCollection {
    int k_max = 3;
    std::vector<int> candidates{1, 2, 3, 4};
    bool with_feedback = true;
};

using CollectionDescriptor = std::variant<IngarchCollection, KnotCollection>;

/// Models of the collection, sharing the emission family of `family` (for
/// knot collections the NB r is taken from it, defaulting to 1).
inline std::vector<ModelSpec> build_collection(const CollectionDescriptor& desc, const EmissionFamily& family) {
    if (const auto* g = std::get_if<IngarchCollection>(&desc)) return enumerate_ingarch(family, g->p_max, g->q_max);
    const auto& k = std::get<KnotCollection>(desc);
    const int r = family.kind == FamilyKind::NegBinomial ? family.r : 1;
    return enumerate_knots(r, k.k_max, k.candidates, k.with_feedback);
}

struct ExperimentConfig {
    std::string name;
    ModelSpec truth_spec = ModelSpec::ingarch(EmissionFamily::poisson(), 0, 0);
    ParamVector truth_theta;
    CollectionDescriptor collection = IngarchCollection{};
    std::vector<Penalty> penalties{Penalty::log_n(), Penalty::power_n(1.0 / 3.0)};
    std::vector<std::size_t> sample_sizes{500, 1000, 2000};
    std::size_t replications = 50;
    std::uint64_t base_seed = 20190101;
    std::size_t burn_in = 500;
    FitOptions fit_options{.sandwich = false};
    unsigned threads = 0;  // 0 = default_threads()
};

struct FrequencyCell {
    std::string penalty;
    std::size_t n = 0;
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> freqs{};
    std::size_t successes = 0;
    std::size_t failures = 0;
};

struct FrequencyTable {
    std::string name;
    bool knot_classes = false;
    std::array<std::string, 3> labels;
    std::vector<std::string> penalties;
    std::vector<std::size_t> sample_sizes;
    std::vector<FrequencyCell> cells;  // sample size outer, penalty inner

    const FrequencyCell& cell(const std::string& penalty, std::size_t n) const {
        for (const auto& c : cells)
            if (c.penalty == penalty && c.n == n) return c;
        throw std::out_of_range("no cell for " + penalty + " at n=" + std::to_string(n));
    }
    double frequency(OutcomeClass cls, const std::string& penalty, std::size_t n) const {
        return cell(penalty, n).freqs[static_cast<std::size_t>(cls)];
    }
};

inline std::array<std::string, 3> outcome_labels(bool knot) {
    if (knot) return {"K_hat<K*", "K_hat=K*", "K_hat>K*"};
    return {"|m_hat|<|m*|", "m_hat=m*", "|m_hat|>=|m*|,m_hat!=m*"};
}

/// For every sample size, simulates replication r with seed base_seed + r,
/// runs the selection under every penalty on shared fits and tallies the
/// outcome classes. Failed replications are counted separately and left out
/// of the frequencies.
inline FrequencyTable run_experiment(const ExperimentConfig& cfg) {
    if (cfg.replications < 1) throw DomainError("replications must be >= 1");
    if (cfg.penalties.empty()) throw DomainError("at least one penalty is required");
    if (cfg.sample_sizes.empty()) throw DomainError("at least one sample size is required");
    validate(cfg.truth_spec, cfg.truth_theta);
    const auto collection = build_collection(cfg.collection, cfg.truth_spec.family());

    FrequencyTable table;
    table.name = cfg.name;
    table.knot_classes = cfg.truth_spec.as_knot() != nullptr;
    table.labels = outcome_labels(table.knot_classes);
    for (const auto& p : cfg.penalties) table.penalties.push_back(p.descriptor());
    table.sample_sizes = cfg.sample_sizes;

    const std::size_t np = cfg.penalties.size();
    for (std::size_t n : cfg.sample_sizes) {
        // outcome[r][k]: class index under penalty k, or -1 on failure.
        std::vector<std::vector<int>> outcome(cfg.replications, std::vector<int>(np, -1));
        parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
            try {
                const auto y = simulate(cfg.truth_spec, cfg.truth_theta,
                                        SimConfig{n, cfg.burn_in, cfg.base_seed + r});
                const auto fc = fit_collection(collection, y, cfg.fit_options, 1);
                for (std::size_t k = 0; k < np; ++k) {
                    const auto sel = select_from_fits(fc, cfg.penalties[k]);
                    outcome[r][k] = static_cast<int>(classify_outcome(sel.chosen_model(), cfg.truth_spec));
                }
            } catch (const Error&) {
                // recorded as a failure
            }
        });
        for (std::size_t k = 0; k < np; ++k) {
            FrequencyCell cell;
            cell.penalty = cfg.penalties[k].descriptor();
            cell.n = n;
            for (std::size_t r = 0; r < cfg.replications; ++r) {
                if (outcome[r][k] < 0)
                    ++cell.failures;
                else
                    ++cell.counts[static_cast<std::size_t>(outcome[r][k])];
            }
            cell.successes = cfg.replications - cell.failures;
            for (std::size_t c = 0; c < 3; ++c)
                cell.freqs[c] = cell.successes ? static_cast<double>(cell.counts[c]) / cell.successes : 0.0;
            table.cells.push_back(cell);
        }
    }
    return table;
}

namespace detail {

/// Role of a flat parameter: 0 intercept, 1 lag (value = lag), 2 feedback
/// (value = lag), 3 knot (value = knot location).
inline std::vector<std::pair<int, int>> parameter_roles(const ModelSpec& spec) {
    std::vector<std::pair<int, int>> roles{{0, 0}};
    for (std::size_t i = 1; i <= spec.n_lags(); ++i) roles.emplace_back(1, static_cast<int>(i));
    for (std::size_t j = 1; j <= spec.n_feedback(); ++j) roles.emplace_back(2, static_cast<int>(j));
    if (const auto* k = spec.as_knot())
        for (int xi : k->knots) roles.emplace_back(3, xi);
    return roles;
}

}  // namespace detail

/// Re-expresses a true parameter in the layout of a (larger) fitted model.
/// Throws std::invalid_argument when a non-zero true coefficient has no free
/// counterpart in `fit_spec`.
inline ParamVector embed_parameters(const ModelSpec& truth_spec, const ParamVector& theta, const ModelSpec& fit_spec) {
    if (truth_spec.form().index() != fit_spec.form().index())
        throw std::invalid_argument("truth and fitted model have different dynamic forms");
    const auto from = detail::parameter_roles(truth_spec);
    const auto to = detail::parameter_roles(fit_spec);
    const auto tflat = theta.flat();
    std::vector<double> out(fit_spec.n_params(), 0.0);
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (tflat[i] == 0.0) continue;
        bool placed = false;
        for (std::size_t j = 0; j < to.size(); ++j) {
            if (to[j] == from[i] && fit_spec.is_active(j)) {
                out[j] = tflat[i];
                placed = true;
                break;
            }
        }
        if (!placed) throw std::invalid_argument("true parameter is not identifiable within " + fit_spec.descriptor());
    }
    return ParamVector::from_flat(fit_spec, out);
}

struct CoverageComponent {
    std::string name;
    double truth = 0.0;
    double coverage = 0.0;  // share of |z| <= 1.96
    double mean_z = 0.0;
    double var_z = 0.0;
};

struct CoverageReport {
    std::string model;
    std::size_t n = 0;
    std::size_t replications = 0;
    std::size_t used = 0;
    std::size_t failures = 0;
    std::vector<CoverageComponent> components;
};

/// Empirical coverage of theta* by theta_hat +- 1.96 SE over seeded
/// replications, with moments of the standardized errors z = (theta_hat -
/// theta*) / SE on every free coordinate of `fit_spec`.
inline CoverageReport coverage_study(const ModelSpec& truth_spec, const ParamVector& truth_theta,
                                     const ModelSpec& fit_spec, std::size_t n, std::size_t replications,
                                     std::uint64_t base_seed, unsigned threads = 0, std::size_t burn_in = 500) {
    if (replications < 1) throw DomainError("replications must be >= 1");
    validate(truth_spec, truth_theta);
    const auto target = embed_parameters(truth_spec, truth_theta, fit_spec).flat();
    const auto free = fit_spec.free_indices();
    const auto names = fit_spec.param_names();

    std::vector<std::optional<std::vector<double>>> zs(replications);
    parallel_for(replications, threads, [&](std::size_t r) {
        try {
            const auto y = simulate(truth_spec, truth_theta, SimConfig{n, burn_in, base_seed + r});
            const auto f = fit(fit_spec, y, FitOptions{.sandwich = true});
            if (!f.sandwich) return;
            const auto est = f.theta_hat.flat();
            std::vector<double> z;
            for (std::size_t idx : free) {
                const double se = f.sandwich->std_errors[static_cast<Eigen::Index>(idx)];
                if (!(se > 0.0)) return;
                z.push_back((est[idx] - target[idx]) / se);
            }
            zs[r] = std::move(z);
        } catch (const Error&) {
        }
    });

    CoverageReport rep;
    rep.model = fit_spec.descriptor();
    rep.n = n;
    rep.replications = replications;
    for (std::size_t a = 0; a < free.size(); ++a) {
        CoverageComponent c;
        c.name = names[free[a]];
        c.truth = target[free[a]];
        rep.components.push_back(c);
    }
    for (const auto& z : zs) {
        if (!z) {
            ++rep.failures;
            continue;
        }
        ++rep.used;
        for (std::size_t a = 0; a < free.size(); ++a) {
            auto& c = rep.components[a];
            if (std::abs((*z)[a]) <= 1.96) c.coverage += 1.0;
            c.mean_z += (*z)[a];
        }
    }
    if (rep.used == 0) return rep;
    const double used = static_cast<double>(rep.used);
    for (auto& c : rep.components) {
        c.coverage /= used;
        c.mean_z /= used;
    }
    for (const auto& z : zs) {
        if (!z) continue;
        for (std::size_t a = 0; a < free.size(); ++a) {
            const double e = (*z)[a] - rep.components[a].mean_z;
            rep.components[a].var_z += e * e;
        }
    }
    for (auto& c : rep.components) c.var_z /= used > 1.0 ? used - 1.0 : 1.0;
    return rep;
}

}  // namespace countsel
