#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "slen/divergence.hpp"
#include "slen/mdl.hpp"
#include "slen/sample.hpp"

using namespace slen;

namespace {

const StepLaw kSynthetic({0.5, 0.25, 0.25});

// Dense pmf on 0..L.
std::vector<double> dense(const MixtureModel& m, Length L) {
    const auto pmf = mixture_pmf(m, L);
    std::vector<double> v(static_cast<std::size_t>(L) + 1, 0.0);
    for (Length i = 1; i <= L; ++i) v[static_cast<std::size_t>(i)] = pmf(i);
    return v;
}

EmpiricalDistribution from_dense(const std::vector<double>& v) {
    std::vector<Length> xs;
    std::vector<double> ps;
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] > 0) {
            xs.push_back(static_cast<Length>(i));
            ps.push_back(v[i]);
            s += v[i];
        }
    for (double& p : ps) p /= s;
    return make_distribution(xs, ps);
}

bool strongly_returning(const MixtureModel& m, double drift) {
    for (std::size_t j = 0; j < m.components(); ++j)
        if (!(m.steps(j).drift() < drift)) return false;
    return true;
}

} // namespace

TEST(LogGrid, EndpointsAndSpacing) {
    for (int b = 1; b <= 16; ++b) {
        const LogGrid g(b);
        EXPECT_EQ(g.points(), 1u << b);
        EXPECT_DOUBLE_EQ(g.decode(0), std::ldexp(1.0, -16));
        EXPECT_EQ(g.decode(g.points() - 1), 1.0);
    }
    const LogGrid g2(2); // ln points at -16 ln2 * {1, 2/3, 1/3, 0}
    EXPECT_NEAR(std::log(g2.decode(1)), -16 * std::log(2.0) * 2 / 3, 1e-14);
    EXPECT_NEAR(std::log(g2.decode(2)), -16 * std::log(2.0) / 3, 1e-14);
}

TEST(LogGrid, RoundTripAndClamping) {
    for (int b = 1; b <= 12; ++b) {
        const LogGrid g(b);
        for (std::uint32_t c = 0; c < g.points(); ++c) EXPECT_EQ(g.encode(g.decode(c)), c);
        EXPECT_EQ(g.encode(1e-30), 0u);
        EXPECT_EQ(g.encode(0.0), 0u);
        EXPECT_EQ(g.encode(1.0), g.points() - 1);
    }
    EXPECT_THROW(LogGrid(0), std::invalid_argument);
    EXPECT_THROW(LogGrid(17), std::invalid_argument);
    EXPECT_THROW(LogGrid(4, 0.0), std::invalid_argument);
}

TEST(LogGrid, OneBitHasTwoValues) {
    const LogGrid g(1);
    EXPECT_EQ(g.encode(0.5), 1u);
    EXPECT_EQ(g.encode(1e-4), 0u);
}

TEST(QuantizeBlock, LogErrorWithinHalfStep) {
    std::mt19937_64 rng(1);
    for (int b = 1; b <= 16; ++b) {
        const LogGrid g(b);
        const double step = 16 * std::log(2.0) / (std::ldexp(1.0, b) - 1);
        for (int t = 0; t < 50; ++t) {
            const auto p = oracle::random_simplex(rng, 4, 1e-4);
            const auto q = quantize_block(p, g);
            double s = 0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double grid_value = std::exp(-16 * std::log(2.0) + q.codes[i] * step);
                EXPECT_LE(std::abs(std::log(p[i]) - std::log(grid_value)), step / 2 + 1e-12);
                s += q.values[i];
            }
            EXPECT_NEAR(s, 1.0, 1e-15);
        }
    }
}

TEST(Quantize, CodesInRangeAndBitCount) {
    std::mt19937_64 rng(2);
    const auto fam = model_family();
    const auto data = empirical(sample(MixtureModel::single(2, kSynthetic), 3000, 3));
    for (int t = 0; t < 30; ++t) {
        const auto& s = fam[static_cast<std::size_t>(rng() % fam.size())];
        const auto m = oracle::random_model(rng, s);
        const auto a = augment(data, m);
        const int b = 1 + static_cast<int>(rng() % 16);
        const auto q = quantize(a, b);
        const std::size_t mc = s.valencies.size(), u = a.aux_points();
        // hand count: every step coordinate, the weights, the aux entries
        const std::size_t d_prime = mc * static_cast<std::size_t>(s.order + 1) + (mc - 1) + (u >= 2 ? u - 1 : 0);
        EXPECT_EQ(q.free_params, d_prime) << s.id();
        EXPECT_EQ(q.total_bits, static_cast<std::int64_t>(b * d_prime + 11)) << s.id();
        const std::size_t stored = mc * static_cast<std::size_t>(s.order + 2) + (mc > 1 ? mc : 0) + (u >= 2 ? u : 0);
        EXPECT_EQ(q.codes.size(), stored);
        for (auto c : q.codes) EXPECT_LT(c, 1u << b);
        double ws = 0;
        for (std::size_t j = 0; j < mc; ++j) {
            ws += q.model.weight(j);
            double ss = 0;
            for (double p : q.model.steps(j).probs()) ss += p;
            EXPECT_NEAR(ss, 1.0, 1e-14);
        }
        EXPECT_NEAR(ws, 1.0, 1e-14);
    }
}

// Near-critical walks (drift close to 0) have long tails whose mass is very
// sensitive to the step law; the bound is checked on clearly returning ones.
TEST(Quantize, SixteenBitsIsAccurate) {
    std::mt19937_64 rng(3);
    const auto fam = model_family();
    const Length L = 400;
    int checked = 0;
    while (checked < 100) {
        const auto& s = fam[static_cast<std::size_t>(rng() % fam.size())];
        const auto m = oracle::random_model(rng, s);
        if (!strongly_returning(m, -0.3)) continue;
        ++checked;
        const auto exact = dense(m, L);
        const auto q = quantize(augment(from_dense(exact), m), 16);
        EXPECT_LT(oracle::dense_gkl(exact, dense(q.model, L)), 1e-3) << s.id();
    }
}

TEST(AugmentedGkl, EqualsGklAtTheOptimalAux) {
    std::mt19937_64 rng(4);
    const auto data = make_distribution({1, 2, 3, 5, 8}, {0.1, 0.2, 0.3, 0.25, 0.15});
    for (const char* id : {"1.k1", "1.k3", "2.k2.5", "1.k2"}) {
        const auto m = oracle::random_model(rng, parse_model_id(id));
        EXPECT_NEAR(augmented_gkl(data, augment(data, m)), gkl(data, mixture_pmf(m, 8)), 1e-13) << id;
    }
}

TEST(MinBits, IsMinimal) {
    const auto data = empirical(sample(MixtureModel::single(3, kSynthetic), 100'000, 5));
    const Tolerance tol(5e-3); // well above the sampling noise of the fits
    for (const char* id : {"1.k3", "2.k3"}) {
        const auto r = fit(data, parse_model_id(id));
        const auto q = min_bits(data, r.model, tol);
        ASSERT_TRUE(q.has_value()) << id;
        EXPECT_LE(q->gkl, tol.delta);
        const auto a = augment(data, r.model);
        EXPECT_NEAR(q->gkl, augmented_gkl(data, quantize(a, q->bits_per_param).augmented), 1e-15);
        if (q->bits_per_param > 1) {
            EXPECT_GT(augmented_gkl(data, quantize(a, q->bits_per_param - 1).augmented), tol.delta) << id;
        }
    }
}

TEST(MinBits, HugeToleranceNeedsOneBit) {
    const auto data = make_distribution({3, 4, 6}, {0.5, 0.3, 0.2});
    const auto q = min_bits(data, MixtureModel::single(3, kSynthetic), Tolerance(1e9));
    ASSERT_TRUE(q.has_value());
    EXPECT_EQ(q->bits_per_param, 1);
}

TEST(MinBits, NotRepresentable) {
    // an exact fit is demanded of a model that cannot produce it
    const auto data = make_distribution({3, 4}, {0.5, 0.5});
    EXPECT_FALSE(min_bits(data, MixtureModel::single(3, kSynthetic), Tolerance::none()).has_value());
}

TEST(NaiveBits, PointMassIsFree) {
    const auto r = naive_bits(make_distribution({7}, {1.0}), Tolerance::none());
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->total_bits, 0);
}

TEST(NaiveBits, UniformPairNeedsOneBit) {
    // both 0.5s round to the top grid point and renormalize back exactly
    const auto r = naive_bits(make_distribution({2, 9}, {0.5, 0.5}), Tolerance::none());
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->bits_per_param, 1);
    EXPECT_EQ(r->total_bits, 1);
    EXPECT_EQ(r->gkl, 0.0);
}

TEST(NaiveBits, GridReachesSmallProbabilities) {
    const auto data = make_distribution({1, 2, 3}, {1 - 2e-7, 1e-7, 1e-7});
    EXPECT_EQ(naive_grid_low_log2(data), -24); // 2^-24 <= 1e-7 < 2^-23
    const auto r = naive_bits(data, Tolerance(1e-6));
    ASSERT_TRUE(r.has_value());
    EXPECT_LE(r->gkl, 1e-6);
    EXPECT_EQ(naive_grid_low_log2(make_distribution({1, 2}, {0.5, 0.5})), -16);
}

TEST(MdlCompare, PicksFewestBitsAndHonoursExclusion) {
    const auto data = empirical(sample(MixtureModel::single(3, kSynthetic), 200'000, 6));
    const Tolerance tol(5e-3); // well above the sampling noise of the fits
    std::vector<FitAttempt> fits;
    for (const char* id : {"1.k1", "1.k3", "1.k2.3", "2.k3"}) {
        const auto s = parse_model_id(id);
        fits.push_back({s, fit(data, s), {}});
    }
    const auto r = mdl_compare(data, fits, tol);
    ASSERT_TRUE(r.winner.has_value());
    EXPECT_EQ(*r.winner, "1.k3");
    ASSERT_TRUE(r.naive.has_value());
    const auto* w = r.find("1.k3");
    ASSERT_NE(w, nullptr);
    for (const auto& row : r.rows) {
        if (row.quantized) {
            EXPECT_GE(row.quantized->total_bits, w->quantized->total_bits);
        }
    }
    EXPECT_LT(w->quantized->total_bits, r.naive->total_bits);

    const auto ex = mdl_compare(data, fits, tol, {"1.k3"});
    EXPECT_EQ(ex.find("1.k3"), nullptr);
    ASSERT_TRUE(ex.winner.has_value());
    EXPECT_NE(*ex.winner, "1.k3");
}

TEST(MdlCompare, TieBreaksOnFitThenId) {
    const auto data = make_distribution({3, 4, 5}, {0.5, 0.3, 0.2});
    const auto s = parse_model_id("1.k3");
    FitResult a, b;
    a.model = MixtureModel::single(3, kSynthetic);
    b.model = a.model;
    // same model under two ids: equal bits and gKL, so the smaller id wins
    std::vector<FitAttempt> fits{{s, b, {}}, {s, a, {}}};
    const auto r = mdl_compare(data, fits, Tolerance(1e9));
    ASSERT_TRUE(r.winner.has_value());
    EXPECT_EQ(*r.winner, "1.k3");
    EXPECT_EQ(r.rows.size(), 2u);
}
