#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "slen/divergence.hpp"
#include "slen/fit.hpp"
#include "slen/sample.hpp"

using namespace slen;

namespace {

const StepLaw kSynthetic({0.5, 0.25, 0.25});

// The exact pmf of `m` on min_k..L, renormalized into a distribution.
EmpiricalDistribution exact_data(const MixtureModel& m, Length L) {
    const auto pmf = mixture_pmf(m, L);
    std::vector<Length> xs;
    std::vector<double> ps;
    double s = 0;
    for (Length i = pmf.first; i <= L; ++i) {
        xs.push_back(i);
        ps.push_back(pmf(i));
        s += pmf(i);
    }
    for (double& p : ps) p /= s;
    return make_distribution(xs, ps);
}

} // namespace

TEST(MixtureObjective, ValueIsGkl) {
    std::mt19937_64 rng(1);
    const auto data = empirical(sample(MixtureModel::single(2, kSynthetic), 5000, 3));
    for (const char* id : {"1.k2", "2.k1.3", "3.k2-4"}) {
        const auto s = parse_model_id(id);
        const auto m = oracle::random_model(rng, s);
        const MixtureObjective f(data, s);
        EXPECT_NEAR(f.value(to_reduced(m)), gkl(data, mixture_pmf(m, data.max_length())), 1e-13) << id;
    }
}

TEST(MixtureObjective, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(2);
    const auto data = empirical(sample(MixtureModel({1, 3}, {0.3, 0.7}, {kSynthetic, kSynthetic}), 5000, 4));
    const auto fam = model_family();
    for (int t = 0; t < 20; ++t) {
        const auto& s = fam[static_cast<std::size_t>(rng() % fam.size())];
        if (s.min_valency() > data.max_length()) continue;
        const MixtureObjective f(data, s);
        const auto w = to_reduced(oracle::random_model(rng, s, 0.05));
        std::vector<double> g(w.size());
        f.evaluate(w, g);
        double worst = 0, scale = 0;
        for (std::size_t d = 0; d < w.size(); ++d) {
            const double fd =
                oracle::central_difference([&](const std::vector<double>& x) { return f.value(x); }, w, d, 1e-6);
            worst = std::max(worst, std::abs(fd - g[d]));
            scale = std::max(scale, std::abs(g[d]));
        }
        EXPECT_LT(worst / scale, 1e-6) << s.id();
    }
}

TEST(MixtureObjective, UnfittableTemplate) {
    const auto data = make_distribution({1, 2, 4}, {0.2, 0.3, 0.5});
    EXPECT_THROW(MixtureObjective(data, ModelStructure(1, {5})), input_error);
    EXPECT_THROW(fit(data, ModelStructure(2, {5})), input_error);
    EXPECT_NO_THROW(MixtureObjective(data, ModelStructure(1, {4, 5})));
}

TEST(SoftmaxChart, ZeroIsUniformAndFloorHolds) {
    const auto s = parse_model_id("2.k1.3");
    const SoftmaxChart chart(s);
    std::vector<double> z(chart.dims(), 0.0);
    EXPECT_EQ(chart.model(z), MixtureModel::uniform(s));
    z[0] = 80;
    z[chart.dims() - 1] = -80;
    const auto m = chart.model(z);
    for (int e = 0; e <= 2; ++e) EXPECT_GE(m.steps(0).at(e), kProbabilityFloor * (1 - 1e-12));
    EXPECT_GE(m.weight(1), kProbabilityFloor * (1 - 1e-12));
}

TEST(SoftmaxChart, PullBackIsChainRule) {
    std::mt19937_64 rng(3);
    const auto data = empirical(sample(MixtureModel::single(3, kSynthetic), 3000, 5));
    const auto s = parse_model_id("1.k2.3");
    const MixtureObjective f(data, s);
    const SoftmaxChart chart(s);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> z(chart.dims());
    for (double& v : z) v = n(rng);
    std::vector<double> full(f.full_dims()), g(chart.dims());
    f.evaluate_full(chart.model(z), full);
    chart.pull_back(z, full, g);
    for (std::size_t d = 0; d < z.size(); ++d) {
        const double fd = oracle::central_difference(
            [&](const std::vector<double>& x) { return f.evaluate_full(chart.model(x), {}); }, z, d, 1e-6);
        EXPECT_NEAR(fd, g[d], 1e-7 * std::max(1.0, std::abs(g[d])));
    }
}

TEST(Fit, RecoversExactSyntheticParameters) {
    const auto truth = MixtureModel::single(3, kSynthetic);
    FitConfig cfg;
    cfg.grad_tol = 1e-5;
    const auto r = fit(exact_data(truth, 400), ModelStructure(1, {3}), cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(r.objective, 1e-8);
    for (int e = -1; e <= 1; ++e) EXPECT_NEAR(r.model.steps(0).at(e), kSynthetic.at(e), 1e-3);
}

TEST(Fit, PointMassPushesTowardTheFloor) {
    const auto data = make_distribution({2}, {1.0});
    const auto r = fit(data, ModelStructure(1, {2}));
    EXPECT_GT(r.model.steps(0).at(-1), 0.999);
    EXPECT_LE(r.model.steps(0).at(-1), 1 - 2 * kProbabilityFloor + 1e-15);
    EXPECT_LT(r.objective, 2e-3);
    EXPECT_GE(r.model.steps(0).at(0), kProbabilityFloor * (1 - 1e-12));
}

TEST(Fit, ReportedObjectiveIsRecomputedGkl) {
    const auto data = empirical(sample(MixtureModel({2, 4}, {0.5, 0.5}, {kSynthetic, kSynthetic}), 4000, 6));
    for (const char* id : {"1.k2.4", "2.k3", "3.k1.5"}) {
        const auto r = fit(data, parse_model_id(id));
        EXPECT_NEAR(r.objective, gkl(data, mixture_pmf(r.model, data.max_length())), 1e-12);
        EXPECT_GE(r.objective, 0.0);
        if (r.converged) {
            EXPECT_LE(r.grad_norm, FitConfig{}.grad_tol);
        }
    }
}

TEST(Fit, ConfigValidation) {
    const auto data = make_distribution({3}, {1.0});
    FitConfig c;
    c.learning_rate = 0;
    EXPECT_THROW(fit(data, ModelStructure(1, {3}), c), std::invalid_argument);
    c = {};
    c.grad_tol = -1;
    EXPECT_THROW(fit(data, ModelStructure(1, {3}), c), std::invalid_argument);
    c = {};
    c.max_iters = 0;
    EXPECT_THROW(fit(data, ModelStructure(1, {3}), c), std::invalid_argument);
}

TEST(Fit, IterationCapStopsEarly) {
    const auto data = empirical(sample(MixtureModel::single(3, kSynthetic), 3000, 7));
    FitConfig c;
    c.max_iters = 3;
    c.grad_tol = 1e-12;
    const auto r = fit(data, parse_model_id("3.k1-3"), c);
    EXPECT_FALSE(r.converged);
    EXPECT_LE(r.iters, 3 + c.fallback_iters);
}

TEST(Fit, RecoversSampledModelWithinNoise) {
    const auto truth = MixtureModel::single(3, kSynthetic);
    const auto s = sample_lengths(truth, 200'000, 8);
    const double delta = inherent_noise(s.lengths).delta;
    const auto data = empirical(histogram_of(s.lengths, static_cast<Length>(kMaxWalkSteps)));
    const auto r = fit(data, ModelStructure(1, {3}));
    const Length L = 600;
    const auto a = mixture_pmf(r.model, L), b = mixture_pmf(truth, L);
    std::vector<double> pa(static_cast<std::size_t>(L) + 1), pb(pa.size());
    for (Length i = 1; i <= L; ++i) {
        pa[static_cast<std::size_t>(i)] = a(i);
        pb[static_cast<std::size_t>(i)] = b(i);
    }
    EXPECT_LT(oracle::dense_gkl(pa, pb), 2 * delta);
}

TEST(FitAll, FamilyIsCompleteUniqueAndDeterministic) {
    const auto data = empirical(sample(MixtureModel::single(3, kSynthetic), 2000, 9));
    FitConfig c;
    c.max_iters = 200;
    c.fallback_iters = 200;
    const auto a = fit_all(data, model_family(), c, 2);
    const auto b = fit_all(data, model_family(), c, 1);
    ASSERT_EQ(a.size(), 93u);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ids.insert(a[i].structure.id());
        ASSERT_TRUE(a[i].result.has_value()) << a[i].error;
        EXPECT_EQ(a[i].result->objective, b[i].result->objective);
        EXPECT_EQ(a[i].result->model, b[i].result->model);
    }
    EXPECT_EQ(ids.size(), 93u);
}

TEST(FitAll, FailedTemplateIsRecorded) {
    const auto data = make_distribution({1, 2}, {0.5, 0.5});
    const auto r = fit_all(data, {ModelStructure(1, {1}), ModelStructure(1, {4})}, {}, 1);
    EXPECT_TRUE(r[0].result.has_value());
    EXPECT_FALSE(r[1].result.has_value());
    EXPECT_NE(r[1].error.find("cannot produce"), std::string::npos);
}
