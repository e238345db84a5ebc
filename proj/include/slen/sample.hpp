#pragma once

// Monte Carlo simulation of the valency walk.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "slen/histogram.hpp"
#include "slen/walk.hpp"

namespace slen {

// Walks still above zero after this many steps are rejected and redrawn.
inline constexpr std::uint64_t kMaxWalkSteps = 10'000'000;

// SplitMix64 finalizer; maps (seed, stream) to an independent seed so that
// every consumer of randomness can be addressed by a counter.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct SampleResult {
    std::vector<Length> lengths; // in generation order
    std::uint64_t rejected = 0;
};

class WalkSampler {
public:
    WalkSampler(const MixtureModel& model, std::uint64_t seed) : model_(model), rng_(seed) {
        for (std::size_t j = 0; j < model.components(); ++j) {
            if (model.steps(j).at(-1) <= 0.0)
                throw std::invalid_argument("walk with p_{-1} = 0 never returns");
            cumulative_steps_.push_back(cumulative(model.steps(j).probs()));
        }
        cumulative_weights_ = cumulative(model.weights());
    }

    // One return time; rejected walks are counted and redrawn.
    Length draw() {
        while (true) {
            const std::size_t j = pick(cumulative_weights_);
            const auto& steps = cumulative_steps_[j];
            std::int64_t height = model_.valency(j);
            std::uint64_t t = 0;
            while (height > 0 && t < kMaxWalkSteps) {
                height += static_cast<std::int64_t>(pick(steps)) - 1;
                ++t;
            }
            if (height == 0) return static_cast<Length>(t);
            ++rejected_;
        }
    }

    std::uint64_t rejected() const noexcept { return rejected_; }

private:
    static std::vector<double> cumulative(std::span<const double> p) {
        std::vector<double> c(p.size());
        double s = 0;
        for (std::size_t i = 0; i < p.size(); ++i) c[i] = (s += p[i]);
        c.back() = 1.0;
        return c;
    }

    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::size_t pick(const std::vector<double>& cum) {
        const double u = uniform();
        std::size_t i = 0;
        while (i + 1 < cum.size() && u >= cum[i]) ++i;
        return i;
    }

    MixtureModel model_;
    std::mt19937_64 rng_;
    std::vector<std::vector<double>> cumulative_steps_;
    std::vector<double> cumulative_weights_;
    std::uint64_t rejected_ = 0;
};

inline SampleResult sample_lengths(const MixtureModel& model, std::uint64_t count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample count must be >= 1");
    WalkSampler sampler(model, seed);
    SampleResult out;
    out.lengths.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i) out.lengths.push_back(sampler.draw());
    out.rejected = sampler.rejected();
    return out;
}

// Histogram of `count` simulated return times. The histogram's cutoff is the
// walk-length cap, so no simulated length is dropped.
inline LengthHistogram sample(const MixtureModel& model, std::uint64_t count, std::uint64_t seed) {
    return histogram_of(sample_lengths(model, count, seed).lengths,
                        static_cast<Length>(kMaxWalkSteps));
}

} // namespace slen
