#include <gtest/gtest.h>

#include <numeric>

#include "countsel/simulate.hpp"

using namespace countsel;

namespace {

std::pair<double, double> moments(const std::vector<double>& xs) {
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return {m, v / static_cast<double>(xs.size() - 1)};
}

std::vector<double> draws(const EmissionFamily& f, double lambda, std::size_t count, std::uint64_t seed) {
    RandomState rng(seed);
    std::vector<double> out(count);
    for (auto& x : out) x = static_cast<double>(sample_emission(f, lambda, rng));
    return out;
}

std::vector<double> as_double(const CountSeries& y) { return {y.begin(), y.end()}; }

}  // namespace

TEST(SampleEmission, PoissonMoments) {
    const auto [m, v] = moments(draws(EmissionFamily::poisson(), 2.0, 100000, 1));
    EXPECT_NEAR(m, 2.0, 0.02);
    EXPECT_NEAR(v, 2.0, 0.05);
}

TEST(SampleEmission, NegBinVariance) {
    const auto [m, v] = moments(draws(EmissionFamily::negbin(8), 2.0, 100000, 2));
    EXPECT_NEAR(m, 2.0, 0.02);
    EXPECT_NEAR(v, 2.5, 0.05);
}

TEST(SampleEmission, BernoulliMean) {
    const auto [m, v] = moments(draws(EmissionFamily::bernoulli(), 0.3, 100000, 3));
    EXPECT_NEAR(m, 0.3, 0.01);
    (void)v;
}

TEST(SampleEmission, DomainErrors) {
    RandomState rng(1);
    EXPECT_THROW(sample_emission(EmissionFamily::bernoulli(), 1.0, rng), DomainError);
    EXPECT_THROW(sample_emission(EmissionFamily::bernoulli(), 0.0, rng), DomainError);
    EXPECT_THROW(sample_emission(EmissionFamily::poisson(), -1.0, rng), DomainError);
}

TEST(Simulate, ModelAStationaryMean) {
    const auto y = simulate(ModelSpec::ingarch(EmissionFamily::poisson(), 2, 0), ParamVector{0.5, {0.3, 0.25}, {}, {}},
                            SimConfig{100000, 500, 5});
    const double target = 0.5 / 0.45;
    EXPECT_NEAR(moments(as_double(y)).first, target, 0.02 * target);
}

TEST(Simulate, ModelBStationaryMean) {
    const auto y = simulate(ModelSpec::ingarch(EmissionFamily::poisson(), 1, 1), ParamVector{1.0, {0.3}, {0.45}, {}},
                            SimConfig{100000, 500, 6});
    EXPECT_NEAR(moments(as_double(y)).first, 4.0, 0.08);
}

TEST(Simulate, InterceptOnlyIsIid) {
    const auto y = simulate(ModelSpec::ingarch(EmissionFamily::poisson(), 0, 0), ParamVector{0.7, {}, {}, {}},
                            SimConfig{10000, 500, 7});
    EXPECT_NEAR(moments(as_double(y)).first, 0.7, 0.03);
}

TEST(Simulate, DeterministicAndSeedSensitive) {
    const auto spec = ModelSpec::knot(EmissionFamily::negbin(1), {2}, true);
    const ParamVector th{1.0, {0.2}, {0.15}, {0.35}};
    const auto a = simulate(spec, th, SimConfig{2000, 500, 42});
    const auto b = simulate(spec, th, SimConfig{2000, 500, 42});
    const auto c = simulate(spec, th, SimConfig{2000, 500, 43});
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a.size(), 2000u);
}

TEST(Simulate, SupportIsRespected) {
    const auto y = simulate(ModelSpec::ingarch(EmissionFamily::bernoulli(), 1, 1), ParamVector{0.1, {0.35}, {0.4}, {}},
                            SimConfig{5000, 500, 8});
    for (auto v : y) EXPECT_TRUE(v == 0 || v == 1);
    const auto z = simulate(ModelSpec::ingarch(EmissionFamily::negbin(2), 1, 0), ParamVector{1.0, {0.4}, {}, {}},
                            SimConfig{5000, 500, 9});
    for (auto v : z) EXPECT_GE(v, 0);
}

TEST(Simulate, KnotVarianceStabilizes) {
    // Second moment finite under the NB moment condition: two seeds agree
    // within a few jackknife standard errors.
    const auto spec = ModelSpec::knot(EmissionFamily::negbin(8), {2}, true);
    const ParamVector th{1.0, {0.2}, {0.15}, {0.35}};
    std::vector<double> vars, ses;
    for (std::uint64_t seed : {101u, 202u}) {
        const auto y = as_double(simulate(spec, th, SimConfig{100000, 500, seed}));
        // Blocked jackknife over 20 blocks.
        const std::size_t B = 20, len = y.size() / B;
        std::vector<double> leave;
        for (std::size_t b = 0; b < B; ++b) {
            std::vector<double> rest;
            rest.reserve(y.size() - len);
            rest.insert(rest.end(), y.begin(), y.begin() + static_cast<long>(b * len));
            rest.insert(rest.end(), y.begin() + static_cast<long>((b + 1) * len), y.end());
            leave.push_back(moments(rest).second);
        }
        const double mbar = std::accumulate(leave.begin(), leave.end(), 0.0) / B;
        double s = 0.0;
        for (double v : leave) s += (v - mbar) * (v - mbar);
        ses.push_back(std::sqrt((B - 1.0) / B * s));
        vars.push_back(moments(y).second);
    }
    EXPECT_LT(std::abs(vars[0] - vars[1]), 3.0 * std::hypot(ses[0], ses[1]));
}

TEST(Simulate, RejectsInvalidTheta) {
    EXPECT_THROW(simulate(ModelSpec::ingarch(EmissionFamily::poisson(), 1, 0), ParamVector{0.5, {1.2}, {}, {}},
                          SimConfig{10, 10, 1}),
                 ConstraintViolation);
}
