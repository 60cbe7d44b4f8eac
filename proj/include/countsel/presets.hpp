#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "countsel/montecarlo.hpp"

namespace countsel {

struct Preset {
    std::string name;
    std::string description;
    ModelSpec spec;
    ParamVector theta;
    CollectionDescriptor collection;
    std::vector<std::size_t> sample_sizes{500, 1000, 2000};
};

/// Simulation scenarios: Poisson INARCH(2), Poisson INGARCH(1,1), binary
/// INARCH(2), binary INGARCH(1,1), the NB knot model for r = 1 and r = 8,
/// and a binary INARCH(1) matching the fitted US recession model.
inline std::vector<Preset> presets() {
    const auto pois = EmissionFamily::poisson();
    const auto bern = EmissionFamily::bernoulli();
    std::vector<Preset> out;
    out.push_back({"model-a", "Poisson INARCH(2): 0.5 + 0.3 Y[t-1] + 0.25 Y[t-2]", ModelSpec::ingarch(pois, 2, 0),
                   ParamVector{0.5, {0.3, 0.25}, {}, {}}, IngarchCollection{5, 5}});
    out.push_back({"model-b", "Poisson INGARCH(1,1): 1 + 0.3 Y[t-1] + 0.45 lambda[t-1]",
                   ModelSpec::ingarch(pois, 1, 1), ParamVector{1.0, {0.3}, {0.45}, {}}, IngarchCollection{5, 5}});
    out.push_back({"model-c", "binary INARCH(2): 0.15 + 0.25 Y[t-1] + 0.2 Y[t-2]", ModelSpec::ingarch(bern, 2, 0),
                   ParamVector{0.15, {0.25, 0.2}, {}, {}}, IngarchCollection{5, 5}});
    out.push_back({"model-d", "binary INGARCH(1,1): 0.1 + 0.35 Y[t-1] + 0.4 lambda[t-1]",
                   ModelSpec::ingarch(bern, 1, 1), ParamVector{0.1, {0.35}, {0.4}, {}}, IngarchCollection{5, 5}});
    for (int r : {1, 8}) {
        out.push_back({"knots-r" + std::to_string(r),
                       "NB(" + std::to_string(r) +
                           ") knot model: 1 + 0.2 Y[t-1] + 0.15 lambda[t-1] + 0.35 (Y[t-1] - 2)^+",
                       ModelSpec::knot(EmissionFamily::negbin(r), {2}, true), ParamVector{1.0, {0.2}, {0.15}, {0.35}},
                       KnotCollection{3, {1, 2, 3, 4}, true}});
    }
    out.push_back({"usrec-proxy", "binary INARCH(1): 0.120 + 0.748 Y[t-1]", ModelSpec::ingarch(bern, 1, 0),
                   ParamVector{0.12, {0.748}, {}, {}}, IngarchCollection{5, 5}, {312}});
    return out;
}

inline Preset find_preset(const std::string& name) {
    for (auto& p : presets())
        if (p.name == name) return p;
    throw std::invalid_argument("unknown preset '" + name + "'");
}

/// Experiment configuration for a preset at desk scale (50 replications).
inline ExperimentConfig preset_experiment(const std::string& name) {
    const auto p = find_preset(name);
    ExperimentConfig cfg;
    cfg.name = p.name;
    cfg.truth_spec = p.spec;
    cfg.truth_theta = p.theta;
    cfg.collection = p.collection;
    cfg.sample_sizes = p.sample_sizes;
    return cfg;
}

}  // namespace countsel
