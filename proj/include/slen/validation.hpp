#pragma once

// End-to-end check on synthetic data: sample a single-component order-1 walk
// with k = 3, measure the inherent noise of the sample, fit the 93-model
// family, and run the Bayesian and MDL comparisons with and without the true
// model in the pool.

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "slen/divergence.hpp"
#include "slen/evidence.hpp"
#include "slen/fit.hpp"
#include "slen/histogram.hpp"
#include "slen/mdl.hpp"
#include "slen/sample.hpp"
#include "slen/walk.hpp"

namespace slen {

inline MixtureModel validation_truth() {
    return MixtureModel::single(3, StepLaw({0.5, 0.25, 0.25}));
}

struct ValidationConfig {
    std::uint64_t count = 2'000'000;
    std::uint64_t seed = 1;
    FitConfig fit;
    std::vector<SampleSize> n_grid{SampleSize::finite(1e3), SampleSize::finite(1e4), SampleSize::finite(1e5),
                                   SampleSize::finite(1e6), SampleSize::finite(1e7), SampleSize::finite(1e9),
                                   SampleSize::infinite()};
    unsigned threads = 0;
};

struct ValidationReport {
    std::string true_id;
    std::uint64_t count = 0;
    std::uint64_t rejected = 0;
    NoiseEstimate noise;
    SummaryStats stats;
    std::vector<FitAttempt> fits;
    ComparisonReport with_true;
    ComparisonReport without_true;
    MdlReport mdl_with_true;
    MdlReport mdl_without_true;
    double seconds_sampling = 0;
    double seconds_fitting = 0;
    double seconds_scoring = 0;
};

inline ValidationReport run_validation(const ValidationConfig& cfg) {
    using clock = std::chrono::steady_clock;
    auto elapsed = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };

    ValidationReport r;
    const MixtureModel truth = validation_truth();
    r.true_id = truth.id();
    r.count = cfg.count;

    auto t0 = clock::now();
    const SampleResult s = sample_lengths(truth, cfg.count, derive_seed(cfg.seed, 0));
    r.rejected = s.rejected;
    r.noise = inherent_noise(s.lengths, SplitKind::first_second);
    const LengthHistogram h = histogram_of(s.lengths, static_cast<Length>(kMaxWalkSteps));
    r.stats = summary(h);
    const EmpiricalDistribution data = empirical(h);
    r.seconds_sampling = elapsed(t0);

    t0 = clock::now();
    FitConfig fc = cfg.fit;
    fc.seed = derive_seed(cfg.seed, 1);
    r.fits = fit_all(data, model_family(), fc, cfg.threads);
    r.seconds_fitting = elapsed(t0);

    t0 = clock::now();
    const Tolerance tol(r.noise.delta);
    const auto terms = evidence_terms_all(data, r.fits);
    r.with_true = compare_terms(terms, tol, cfg.n_grid);
    r.without_true = compare_terms(terms, tol, cfg.n_grid, {r.true_id});
    r.mdl_with_true = mdl_compare(data, r.fits, tol);
    r.mdl_without_true = mdl_compare(data, r.fits, tol, {r.true_id});
    r.seconds_scoring = elapsed(t0);
    return r;
}

} // namespace slen
