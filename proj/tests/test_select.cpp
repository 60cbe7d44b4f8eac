#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "countsel/select.hpp"
#include "countsel/simulate.hpp"

using namespace countsel;

namespace {
const auto kPois = EmissionFamily::poisson();

std::size_t argmin_at(const SelectionResult& s, double kappa) {
    std::size_t best = 0;
    double bc = INFINITY;
    for (std::size_t i = 0; i < s.table.size(); ++i) {
        if (s.table[i].failed) continue;
        const double c = -2 * s.table[i].loglik + kappa * static_cast<double>(s.table[i].dim);
        if (c < bc) {
            bc = c;
            best = i;
        }
    }
    return best;
}
}  // namespace

TEST(Penalty, Values) {
    EXPECT_NEAR(Penalty::log_n().value(1000), 6.907755, 1e-6);
    EXPECT_NEAR(Penalty::power_n(1.0 / 3.0).value(1000), 10.0, 1e-9);
    EXPECT_NEAR(penalty_value(Penalty::log_n(), 2000), 7.600902, 1e-6);
    EXPECT_THROW(Penalty::log_n().value(1), DomainError);
    EXPECT_THROW(Penalty::power_n(1.5), DomainError);
}

TEST(Penalty, Parse) {
    EXPECT_EQ(Penalty::parse("logn").descriptor(), "logn");
    EXPECT_NEAR(Penalty::parse("pow:1/3").value(1000), 10.0, 1e-9);
    EXPECT_NEAR(Penalty::parse("pow:0.3333").value(1000), std::pow(1000.0, 0.3333), 1e-12);
    EXPECT_THROW(Penalty::parse("aic"), DomainError);
}

TEST(Criterion, Examples) {
    EXPECT_DOUBLE_EQ(criterion(0, 2, 1), 2.0);
    EXPECT_DOUBLE_EQ(criterion(-100, 0, 6.9078), 200.0);
    EXPECT_NEAR(criterion(-523.4, 3, 7.6009), 1069.6027, 1e-9);
}

TEST(Enumerate, IngarchCounts) {
    EXPECT_EQ(enumerate_ingarch(kPois, 5, 5).size(), 36u);
    const auto one = enumerate_ingarch(kPois, 0, 0);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].dim(), 0u);
    std::multiset<std::size_t> dims;
    for (const auto& m : enumerate_ingarch(kPois, 2, 1)) dims.insert(m.dim());
    EXPECT_EQ(dims, (std::multiset<std::size_t>{0, 1, 2, 1, 2, 3}));
}

TEST(Enumerate, KnotCounts) {
    EXPECT_EQ(enumerate_knots(8, 3, {1, 2, 3, 4}).size(), 15u);
    const auto k0 = enumerate_knots(8, 0, {1, 2, 3, 4});
    ASSERT_EQ(k0.size(), 1u);
    EXPECT_EQ(k0[0].n_knots(), 0u);
    EXPECT_EQ(enumerate_knots(1, 1, {2}).size(), 2u);
    for (const auto& m : enumerate_knots(8, 3, {1, 2, 3, 4})) EXPECT_EQ(m.dim(), 2 + m.n_knots());
    EXPECT_THROW(enumerate_knots(1, 3, {1, 2}), DomainError);
}

TEST(Select, SingletonCollection) {
    const CountSeries y{1, 0, 2, 3, 1, 0};
    const auto s = select({ModelSpec::ingarch(kPois, 1, 0)}, y, Penalty::log_n());
    EXPECT_EQ(s.chosen, 0u);
}

class SelectOnModelA : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        y_ = new CountSeries(simulate(ModelSpec::ingarch(kPois, 2, 0), ParamVector{0.5, {0.3, 0.25}, {}, {}},
                                      SimConfig{1000, 500, 31}));
        fc_ = new FittedCollection(fit_collection(enumerate_ingarch(kPois, 3, 3), *y_, FitOptions{.sandwich = false}));
    }
    static void TearDownTestSuite() {
        delete y_;
        delete fc_;
    }
    static CountSeries* y_;
    static FittedCollection* fc_;
};
CountSeries* SelectOnModelA::y_ = nullptr;
FittedCollection* SelectOnModelA::fc_ = nullptr;

TEST_F(SelectOnModelA, PicksTruth) {
    const auto s = select_from_fits(*fc_, Penalty::log_n());
    EXPECT_EQ(s.chosen_model(), ModelSpec::ingarch(kPois, 2, 0));
}

TEST_F(SelectOnModelA, CriterionDecomposition) {
    const auto s = select_from_fits(*fc_, Penalty::log_n());
    for (const auto& r : s.table) {
        ASSERT_FALSE(r.failed);
        EXPECT_EQ(r.criterion, -2.0 * r.loglik + s.kappa * static_cast<double>(r.dim));
    }
}

TEST_F(SelectOnModelA, FitsArePenaltyInvariant) {
    const auto a = select_from_fits(*fc_, Penalty::log_n());
    const auto b = select_from_fits(*fc_, Penalty::power_n(1.0 / 3.0));
    ASSERT_EQ(a.table.size(), b.table.size());
    for (std::size_t i = 0; i < a.table.size(); ++i) EXPECT_EQ(a.table[i].loglik, b.table[i].loglik);
}

TEST_F(SelectOnModelA, OverPenalizationNeverGrowsDimension) {
    const auto s = select_from_fits(*fc_, Penalty::log_n());
    std::size_t prev = s.table[argmin_at(s, 0.0)].dim;
    for (double kappa = 0.5; kappa < 200; kappa *= 1.5) {
        const std::size_t d = s.table[argmin_at(s, kappa)].dim;
        EXPECT_LE(d, prev);
        prev = d;
    }
}

TEST_F(SelectOnModelA, RerunIsIdentical) {
    const auto a = select(enumerate_ingarch(kPois, 3, 3), *y_, Penalty::log_n(), FitOptions{.sandwich = false});
    const auto b = select(enumerate_ingarch(kPois, 3, 3), *y_, Penalty::log_n(), FitOptions{.sandwich = false}, 2);
    EXPECT_EQ(a.chosen, b.chosen);
    for (std::size_t i = 0; i < a.table.size(); ++i) EXPECT_EQ(a.table[i].loglik, b.table[i].loglik);
}

TEST(Select, TiesFavourSmallerThenStructuralOrder) {
    auto row = [](ModelSpec m, double ll) {
        SelectionRow r{.model = m, .dim = m.dim(), .failure = {}, .fit = {}};
        r.loglik = ll;
        r.criterion = criterion(ll, r.dim, 2.0);
        return r;
    };
    // Three equal criteria; then two at equal dim, ordered by (p,q).
    std::vector<SelectionRow> t{row(ModelSpec::ingarch(kPois, 0, 1), -10.0), row(ModelSpec::ingarch(kPois, 1, 0), -10.0),
                                row(ModelSpec::ingarch(kPois, 0, 0), -9.0)};
    EXPECT_EQ(argmin_criterion(t), 2u);
    t.pop_back();
    EXPECT_EQ(t[argmin_criterion(t)].model, ModelSpec::ingarch(kPois, 0, 1));
}

TEST(Select, FailedFitsAreInfiniteAndAllFailedThrows) {
    // Bernoulli data with a value 2 makes every fit fail.
    const CountSeries y{0, 1, 2, 1, 0, 1};
    EXPECT_THROW(select(enumerate_ingarch(EmissionFamily::bernoulli(), 1, 0), y, Penalty::log_n()), AllFitsFailed);
}
