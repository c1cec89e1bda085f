#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "confbb/benchmarks.hpp"
#include "confbb/calibration.hpp"
#include "test_support.hpp"

using namespace confbb;
using namespace confbb::testing;

TEST(AlphaGrid, DefaultGrid) {
    const AlphaGrid g = AlphaGrid::default_grid();
    ASSERT_EQ(g.size(), 13u);
    EXPECT_NEAR(g[0], 0.05, 1e-15);
    EXPECT_EQ(g[12], 50.0);
    EXPECT_EQ(g[5], 1.0);
    EXPECT_EQ(g.index_of(1.0), 5);
    for (std::size_t k = 1; k < 6; ++k) EXPECT_NEAR(std::log(g[k] / g[k - 1]), std::log(20.0) / 5.0, 1e-12);
    for (std::size_t k = 6; k < 13; ++k) EXPECT_NEAR(std::log(g[k] / g[k - 1]), std::log(50.0) / 7.0, 1e-12);
}

TEST(AlphaGrid, Validation) {
    EXPECT_THROW(AlphaGrid(std::vector<double>{}), InvalidParameter);
    EXPECT_THROW(AlphaGrid({0.0, 1.0}), InvalidParameter);
    EXPECT_THROW(AlphaGrid({-1.0}), InvalidParameter);
    EXPECT_THROW(AlphaGrid({1.0, 1.0}), InvalidParameter);
    EXPECT_THROW(AlphaGrid({2.0, 1.0}), InvalidParameter);
    EXPECT_NO_THROW(AlphaGrid({0.1, 2.0}));
}

TEST(SelectAlpha, InjectedScores) {
    const CalibrationResult r = select_alpha(AlphaGrid({0.5, 1.0, 2.0}), {-3.0, -1.0, -2.0}, Criterion::log_score);
    EXPECT_EQ(r.selected, 1u);
    EXPECT_EQ(r.alpha_hat, 1.0);
}

TEST(SelectAlpha, TiesGoToSmallestAlpha) {
    EXPECT_EQ(select_alpha(AlphaGrid({0.5, 1.0, 2.0}), {-1.0, -1.0, -1.0}, Criterion::log_score).alpha_hat, 0.5);
    EXPECT_EQ(select_alpha(AlphaGrid({0.5, 1.0, 2.0}), {-2.0, -1.0, -1.0}, Criterion::coverage).alpha_hat, 1.0);
}

TEST(SelectAlpha, ShapeMismatch) {
    EXPECT_THROW(select_alpha(AlphaGrid({0.5, 1.0}), {-1.0}, Criterion::log_score), ShapeError);
}

TEST(SelectAlpha, ArgmaxProperty) {
    Rng g(1);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t K = 1 + static_cast<std::size_t>(rng::uniform01(g) * 20);
        std::vector<double> alphas, scores;
        double a = 0.01;
        for (std::size_t k = 0; k < K; ++k) {
            a *= 1.1 + rng::uniform01(g);
            alphas.push_back(a);
            scores.push_back(std::round(4.0 * rng::standard_normal(g)));  // integer scores force ties
        }
        const CalibrationResult r = select_alpha(AlphaGrid(alphas), scores, Criterion::log_score);
        for (std::size_t k = 0; k < K; ++k) {
            EXPECT_GE(scores[r.selected], scores[k]);
            if (k < r.selected) EXPECT_LT(scores[k], scores[r.selected]);
        }
    }
}

TEST(Criterion, Parse) {
    EXPECT_EQ(parse_criterion("log_score"), Criterion::log_score);
    EXPECT_EQ(parse_criterion("coverage"), Criterion::coverage);
    EXPECT_THROW(parse_criterion("crps"), InvalidParameter);
}

class TuneOnLinear : public ::testing::Test {
protected:
    Dataset train = random_linear_data(50, 2, 10);
    Dataset val = random_linear_data(30, 2, 11).with_role(Role::validation);
    FittedModel model = fit_erm(ModelSpec::linear(true), train);
    InfluencePack pack = InfluencePack::from(model);
    TuneOptions opt = [] {
        TuneOptions o;
        o.B = 300;
        o.seed = 12;
        return o;
    }();

    Dataset shifted_targets(double offset_in_sd) const {
        Dataset d = val;
        for (Eigen::Index i = 0; i < d.size(); ++i)
            d.y(i) = predict(model, d.X.row(i).transpose()) + (i % 2 ? 1.0 : -1.0) * offset_in_sd * model.sigma_hat;
        return d;
    }
};

TEST_F(TuneOnLinear, SinglePointGrid) {
    const CalibrationResult r = tune_alpha(model, pack, val, AlphaGrid({1.0}), opt);
    EXPECT_EQ(r.alpha_hat, 1.0);
    EXPECT_EQ(r.scores.size(), 1u);
    EXPECT_TRUE(std::isfinite(r.scores[0]));
}

TEST_F(TuneOnLinear, ScoresAreReproducibleAndSelectedIsMax) {
    const AlphaGrid grid = AlphaGrid::default_grid();
    const CalibrationResult a = tune_alpha(model, pack, val, grid, opt);
    const CalibrationResult b = tune_alpha(model, pack, val, grid, opt);
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(a.selected, b.selected);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        EXPECT_GE(a.scores[a.selected], a.scores[k]);
        EXPECT_EQ(a.scores[k], score_at_grid_point(model, pack, val, grid, k, opt));
    }
}

TEST_F(TuneOnLinear, TargetsAtTheMeanPreferConcentration) {
    const CalibrationResult r = tune_alpha(model, pack, shifted_targets(0.0), AlphaGrid({0.05, 1.0, 50.0}), opt);
    EXPECT_EQ(r.alpha_hat, 50.0);
}

TEST_F(TuneOnLinear, DistantTargetsPreferSpread) {
    const CalibrationResult r = tune_alpha(model, pack, shifted_targets(5.0), AlphaGrid({0.05, 1.0, 50.0}), opt);
    EXPECT_EQ(r.alpha_hat, 0.05);
}

TEST_F(TuneOnLinear, CoverageCriterion) {
    TuneOptions o = opt;
    o.criterion = Criterion::coverage;
    o.nominal_level = 0.8;
    const AlphaGrid grid({0.1, 1.0, 10.0});
    const CalibrationResult r = tune_alpha(model, pack, val, grid, o);
    EXPECT_EQ(r.criterion, Criterion::coverage);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto ens = build_ensembles(model, pack, val.X, grid[k], o.B, draw_seed_for(o.seed, k));
        const auto iv = intervals_for(ens, 0.8, true, noise_seed_for(o.seed, k));
        std::size_t inside = 0;
        for (std::size_t i = 0; i < iv.size(); ++i) inside += iv[i].lo <= val.y(i) && val.y(i) <= iv[i].hi ? 1 : 0;
        const double cov = static_cast<double>(inside) / static_cast<double>(iv.size());
        EXPECT_NEAR(r.scores[k], -std::abs(cov - 0.8), 1e-15);
        EXPECT_LE(r.scores[k], 0.0);
    }
}

TEST_F(TuneOnLinear, LogScoreMatchesDirectEnsembles) {
    const AlphaGrid grid({0.3, 3.0});
    const CalibrationResult r = tune_alpha(model, pack, val, grid, opt);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto ens = build_ensembles(model, pack, val.X, grid[k], opt.B, draw_seed_for(opt.seed, k));
        double acc = 0.0;
        for (std::size_t i = 0; i < ens.size(); ++i) acc += log_score(ens[i], val.y(static_cast<Eigen::Index>(i)));
        EXPECT_NEAR(r.scores[k], acc / static_cast<double>(ens.size()), 1e-12);
    }
}

TEST_F(TuneOnLinear, InvalidInputs) {
    EXPECT_THROW(tune_alpha(model, pack, Dataset(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)), AlphaGrid({1.0}), opt),
                 InvalidParameter);
    TuneOptions o = opt;
    o.B = 1;
    EXPECT_THROW(tune_alpha(model, pack, val, AlphaGrid({1.0}), o), InvalidParameter);
    o = opt;
    o.nominal_level = 1.0;
    EXPECT_THROW(tune_alpha(model, pack, val, AlphaGrid({1.0}), o), InvalidParameter);
    EXPECT_THROW(tune_alpha(model, pack, val, AlphaGrid(), opt), InvalidParameter);
}

TEST_F(TuneOnLinear, ConsistencyGapVanishesWhenValidationIsTheTestSet) {
    const Dataset test = val;
    const DataSource same = [&](Eigen::Index, Rng&) { return test; };
    const auto rows = consistency_diagnostic(model, pack, AlphaGrid::default_grid(), {30, 31}, test, 3, same, 5, 200);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& row : rows) {
        EXPECT_EQ(row.mean_gap, 0.0);
        EXPECT_EQ(row.sd_gap, 0.0);
    }
}

TEST_F(TuneOnLinear, ConsistencyValidatesArguments) {
    const DataSource src = [&](Eigen::Index, Rng&) { return val; };
    EXPECT_THROW(consistency_diagnostic(model, pack, AlphaGrid({1.0}), {}, val, 2, src, 0), InvalidParameter);
    EXPECT_THROW(consistency_diagnostic(model, pack, AlphaGrid({1.0}), {10, 5}, val, 2, src, 0), InvalidParameter);
    EXPECT_THROW(consistency_diagnostic(model, pack, AlphaGrid({1.0}), {10}, val, 0, src, 0), InvalidParameter);
}

TEST(Consistency, SinglePointGridGapIsFinite) {
    const Dataset train = random_linear_data(40, 1, 20);
    const FittedModel m = fit_erm(ModelSpec::linear(true), train);
    const InfluencePack pack = InfluencePack::from(m);
    const Dataset test = random_linear_data(500, 1, 21);
    const DataSource src = [](Eigen::Index n, Rng& g) { return random_linear_data(n, 1, g()); };
    const auto rows = consistency_diagnostic(m, pack, AlphaGrid({1.0}), {20}, test, 4, src, 22, 100);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].m, 20);
    EXPECT_TRUE(std::isfinite(rows[0].mean_gap));
    EXPECT_GT(rows[0].mean_gap, 0.0);
    EXPECT_GE(rows[0].sd_gap, 0.0);
}

TEST(Consistency, GapShrinksWithValidationSizeOnForrester) {
    const BenchmarkFunction f = functions::forrester();
    const double noise = 0.05 * output_sd(f);
    Rng gt(30), ge(31);
    const Dataset train = generate_dataset(f, 60, noise, gt, Role::train);
    const Dataset test = generate_dataset(f, 2000, noise, ge, Role::test);
    const FittedModel m = fit_erm(ModelSpec::mlp(8), train, 32);
    const InfluencePack pack = InfluencePack::from(m);
    const DataSource src = [&](Eigen::Index n, Rng& g) { return generate_dataset(f, n, noise, g, Role::validation); };
    const auto rows = consistency_diagnostic(m, pack, AlphaGrid::default_grid(), {25, 400}, test, 8, src, 33, 200);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_LT(rows[1].mean_gap, rows[0].mean_gap);
}
