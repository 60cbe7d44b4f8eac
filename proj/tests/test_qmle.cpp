#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "countsel/qmle.hpp"
#include "countsel/simulate.hpp"
#include "test_support.hpp"

using namespace countsel;

namespace {
const auto kPois = EmissionFamily::poisson();
const auto kBern = EmissionFamily::bernoulli();

double sd(const std::vector<double>& xs) {
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}
}  // namespace

TEST(QuasiLoglik, Examples) {
    const auto s0 = ModelSpec::ingarch(kPois, 0, 0);
    EXPECT_NEAR(quasi_loglik(s0, ParamVector{0.5, {}, {}, {}}, CountSeries{1}), std::log(0.5) - 0.5, 1e-12);
    EXPECT_NEAR(quasi_loglik(s0, ParamVector{0.5, {}, {}, {}}, CountSeries{1}), -1.19315, 1e-5);
    EXPECT_DOUBLE_EQ(quasi_loglik(s0, ParamVector{1.0, {}, {}, {}}, CountSeries{0, 0}), -2.0);
    EXPECT_NEAR(quasi_loglik(ModelSpec::ingarch(kPois, 1, 0), ParamVector{0.5, {0.3}, {}, {}}, CountSeries{2, 1}),
                2 * std::log(0.5) - 0.5 + std::log(1.1) - 1.1, 1e-12);
}

TEST(QuasiLoglik, AgreesWithStraightLineImplementation) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 100; ++rep) {
        const auto c = testing_support::random_case(rng);
        const double a = quasi_loglik(c.spec, c.theta, c.y);
        const double b = testing_support::reference_loglik(c.spec, c.theta, c.y);
        EXPECT_LE(std::abs(a - b), 1e-10 * static_cast<double>(c.y.size())) << c.spec.descriptor();
    }
}

TEST(QuasiScore, ZeroAtSampleMean) {
    const CountSeries y{0, 3, 1, 2, 2, 5, 0};
    const double ybar = 13.0 / 7.0;
    const auto s = quasi_score(ModelSpec::ingarch(kPois, 0, 0), ParamVector{ybar, {}, {}, {}}, y);
    ASSERT_EQ(s.size(), 1);
    EXPECT_NEAR(s[0], 0.0, 1e-12);
}

TEST(QuasiScore, MatchesFiniteDifferences) {
    std::mt19937_64 rng(22);
    for (int rep = 0; rep < 30; ++rep) {
        const auto c = testing_support::random_case(rng, true);
        const auto score = quasi_score(c.spec, c.theta, c.y);
        const auto free = c.spec.free_indices();
        const auto flat = c.theta.flat();
        for (std::size_t k = 0; k < free.size(); ++k) {
            const double h = 1e-6;
            auto up = flat, dn = flat;
            up[free[k]] += h;
            dn[free[k]] -= h;
            const double fd = (testing_support::reference_loglik(c.spec, ParamVector::from_flat(c.spec, up), c.y) -
                               testing_support::reference_loglik(c.spec, ParamVector::from_flat(c.spec, dn), c.y)) /
                              (2 * h);
            const double an = score[static_cast<Eigen::Index>(k)];
            EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(fd))) << c.spec.descriptor();
        }
    }
}

TEST(Fit, InterceptOnlyIsSampleMean) {
    const CountSeries y{1, 2, 0, 3, 1};  // mean 1.4
    const auto f = fit(ModelSpec::ingarch(kPois, 0, 0), y);
    EXPECT_TRUE(f.converged);
    EXPECT_NEAR(f.theta_hat.alpha0, 1.4, 1e-6);
}

TEST(Fit, MatchesGridOracle) {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 3; ++rep) {
        const auto y = testing_support::random_short_series(rng);
        const auto [g0, g1] = testing_support::grid_argmax_inarch1(y);
        const auto f = fit(ModelSpec::ingarch(kPois, 1, 0), y);
        EXPECT_NEAR(f.theta_hat.alpha0, g0, 2e-3);
        EXPECT_NEAR(f.theta_hat.alphas[0], g1, 2e-3);
    }
}

TEST(Fit, MonotoneNesting) {
    const auto y = simulate(ModelSpec::ingarch(kPois, 1, 1), ParamVector{1.0, {0.3}, {0.45}, {}}, SimConfig{800, 500, 3});
    const FitOptions o{.sandwich = false};
    const double l00 = fit(ModelSpec::ingarch(kPois, 0, 0), y, o).loglik;
    const double l10 = fit(ModelSpec::ingarch(kPois, 1, 0), y, o).loglik;
    const double l20 = fit(ModelSpec::ingarch(kPois, 2, 0), y, o).loglik;
    const double l11 = fit(ModelSpec::ingarch(kPois, 1, 1), y, o).loglik;
    const double l21 = fit(ModelSpec::ingarch(kPois, 2, 1), y, o).loglik;
    EXPECT_GE(l10, l00 - 1e-6);
    EXPECT_GE(l20, l10 - 1e-6);
    EXPECT_GE(l11, l10 - 1e-6);
    EXPECT_GE(l21, l11 - 1e-6);
    EXPECT_GE(l21, l20 - 1e-6);
}

TEST(Fit, BinaryRecessionProxyWithinThreeSe) {
    const auto spec = ModelSpec::ingarch(kBern, 1, 0);
    const ParamVector truth{0.12, {0.748}, {}, {}};
    const auto y = simulate(spec, truth, SimConfig{312, 500, 4});
    const auto f = fit(spec, y);
    ASSERT_TRUE(f.sandwich.has_value());
    const auto& se = f.sandwich->std_errors;
    EXPECT_LE(std::abs(f.theta_hat.alpha0 - 0.12), 3 * se[0]);
    EXPECT_LE(std::abs(f.theta_hat.alphas[0] - 0.748), 3 * se[1]);
}

TEST(Fit, DeterministicAcrossCalls) {
    const auto y = simulate(ModelSpec::ingarch(kPois, 2, 0), ParamVector{0.5, {0.3, 0.25}, {}, {}}, SimConfig{500, 500, 5});
    const auto a = fit(ModelSpec::ingarch(kPois, 2, 2), y);
    const auto b = fit(ModelSpec::ingarch(kPois, 2, 2), y);
    EXPECT_EQ(a.theta_hat.flat(), b.theta_hat.flat());
    EXPECT_EQ(a.loglik, b.loglik);
}

TEST(Fit, InputContracts) {
    EXPECT_THROW(fit(ModelSpec::ingarch(kPois, 2, 0), CountSeries{1, 2}), DomainError);
    EXPECT_THROW(fit(ModelSpec::ingarch(kBern, 1, 0), CountSeries{0, 1, 2, 1}), DomainError);
    EXPECT_THROW(fit(ModelSpec::ingarch(kPois, 1, 0), CountSeries{0, 1, -1, 1}), DomainError);
}

TEST(Fit, ConstantSeriesFlaggedDegenerate) {
    const auto f = fit(ModelSpec::ingarch(kPois, 1, 0), CountSeries(50, 2));
    EXPECT_TRUE(f.degenerate);
    EXPECT_NEAR(f.theta_hat.alpha0 + 2 * f.theta_hat.alphas[0], 2.0, 1e-4);
}

TEST(Fit, MisspecifiedSpreadShrinks) {
    const auto truth = ModelSpec::ingarch(kPois, 1, 1);
    const ParamVector th{1.0, {0.3}, {0.45}, {}};
    const auto spec = ModelSpec::ingarch(kPois, 1, 0);
    std::vector<double> small, large;
    for (std::uint64_t s = 0; s < 20; ++s) {
        small.push_back(fit(spec, simulate(truth, th, SimConfig{2000, 500, 100 + s}), {.sandwich = false}).theta_hat.alphas[0]);
        large.push_back(fit(spec, simulate(truth, th, SimConfig{20000, 500, 200 + s}), {.sandwich = false}).theta_hat.alphas[0]);
    }
    EXPECT_LT(sd(large), 0.5 * sd(small));
}

TEST(Sandwich, InterceptOnlyClosedForm) {
    const auto y = simulate(ModelSpec::ingarch(kPois, 0, 0), ParamVector{3.0, {}, {}, {}}, SimConfig{4000, 0, 6});
    const auto f = fit(ModelSpec::ingarch(kPois, 0, 0), y);
    ASSERT_TRUE(f.sandwich.has_value());
    const double n = static_cast<double>(y.size());
    const double m = f.theta_hat.alpha0;
    double v = 0.0;
    for (auto x : y) v += (x - m) * (x - m);
    v /= n;
    // J = 1/m, I = v/m^2, Sigma = v.
    EXPECT_NEAR(f.sandwich->std_errors[0], std::sqrt(v / n), 1e-9);
    EXPECT_NEAR(f.sandwich->std_errors[0], std::sqrt(m / n), 0.1 * std::sqrt(m / n));
}

TEST(Sandwich, PoissonInformationIdentity) {
    const auto spec = ModelSpec::ingarch(kPois, 2, 0);
    const auto y = simulate(spec, ParamVector{0.5, {0.3, 0.25}, {}, {}}, SimConfig{5000, 500, 7});
    const auto f = fit(spec, y);
    ASSERT_TRUE(f.sandwich.has_value());
    const double rel = (f.sandwich->I_hat - f.sandwich->J_hat).norm() / f.sandwich->J_hat.norm();
    EXPECT_LE(rel, 0.1);
}

TEST(Sandwich, ZeroGradientIsSingular) {
    const Eigen::MatrixXd g = Eigen::MatrixXd::Zero(1, 10);
    const std::vector<double> lam(10, 1.0);
    const CountSeries y(10, 1);
    const auto [j, i] = information_matrices(g, lam, y);
    EXPECT_THROW(sandwich_from_information(j, i, 10), SingularInformation);
}

TEST(Sandwich, RequiresConvergedFit) {
    FitResult f;
    f.converged = false;
    EXPECT_THROW(sandwich(ModelSpec::ingarch(kPois, 0, 0), f, CountSeries{1, 2}), OptimFailure);
}
