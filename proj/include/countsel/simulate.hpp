#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "countsel/errors.hpp"
#include "countsel/model.hpp"
#include "countsel/rng.hpp"

namespace countsel {

struct SimConfig {
    std::size_t n = 1000;
    std::size_t burn_in = 500;
    std::uint64_t seed = 0;
};

/// One draw with conditional mean `lambda`.
///
/// NegBinomial(r) uses success probability p = r / (r + lambda), so the
/// variance is lambda + lambda^2 / r. The draw goes through
/// std::negative_binomial_distribution, which libstdc++ realizes as a
/// Gamma(r, (1-p)/p) mixture of Poissons; outputs are reproducible for a
/// given standard library.
inline std::int64_t sample_emission(const EmissionFamily& family, double lambda, RandomState& rng) {
    switch (family.kind) {
        case FamilyKind::Poisson: {
            if (!(lambda > 0.0)) throw DomainError("Poisson mean must be positive");
            std::poisson_distribution<std::int64_t> dist(lambda);
            return dist(rng);
        }
        case FamilyKind::NegBinomial: {
            if (!(lambda > 0.0)) throw DomainError("negative binomial mean must be positive");
            const double p = family.r / (family.r + lambda);
            std::negative_binomial_distribution<std::int64_t> dist(family.r, p);
            return dist(rng);
        }
        case FamilyKind::Bernoulli: {
            if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("Bernoulli mean must lie in (0,1)");
            std::bernoulli_distribution dist(lambda);
            return dist(rng) ? 1 : 0;
        }
    }
    throw DomainError("unknown emission family");
}

/// Runs the joint (lambda_t, Y_t) recursion for burn_in + n steps from the
/// zero-data fixed point and returns the last n counts.
inline CountSeries simulate(const ModelSpec& spec, const ParamVector& theta, const SimConfig& cfg) {
    if (cfg.n < 1) throw DomainError("n must be >= 1");
    validate(spec, theta);
    const detail::Recursion rec(spec);
    const auto flat = theta.flat();
    RandomState rng(cfg.seed);

    const std::size_t total = cfg.burn_in + cfg.n;
    const auto hist = static_cast<std::size_t>(std::max(rec.max_lag, 1));
    // Ring buffers of the most recent counts and means; index 0 is t-1.
    std::vector<std::int64_t> ys(hist, 0);
    std::vector<double> lams(hist, rec.fixed_point(flat));

    CountSeries out;
    out.reserve(cfg.n);
    for (std::size_t t = 0; t < total; ++t) {
        double lam = flat[0];
        for (const auto& r : rec.regressors)
            lam += flat[r.param] * knot_basis(ys[static_cast<std::size_t>(r.lag - 1)], r.xi);
        for (std::size_t j = 0; j < rec.feedback.size(); ++j) lam += flat[rec.feedback[j]] * lams[j];

        const std::int64_t y = sample_emission(spec.family(), lam, rng);
        for (std::size_t i = hist - 1; i > 0; --i) {
            ys[i] = ys[i - 1];
            lams[i] = lams[i - 1];
        }
        ys[0] = y;
        lams[0] = lam;
        if (t >= cfg.burn_in) out.push_back(y);
    }
    return out;
}

}  // namespace countsel
