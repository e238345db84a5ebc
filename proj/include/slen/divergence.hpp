#pragma once

// Generalized KL divergence for distributions with mismatched supports.
//
// With lambda = P(supp P & supp Q),
//
//     gKL(P, Q) = -lambda ln lambda + sum_{x in supp P & supp Q} P(x) ln(P(x)/Q(x)).
//
// It coincides with KL when the supports agree and is 0 when they are disjoint.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "slen/histogram.hpp"
#include "slen/walk.hpp"

namespace slen {

struct Tolerance {
    double delta = 0; // nats

    Tolerance() = default;
    explicit Tolerance(double d) : delta(d) {
        if (std::isnan(d) || d < 0) throw std::invalid_argument("tolerance must be >= 0");
    }
    static Tolerance none() { return Tolerance(0.0); }
};

struct GklResult {
    double value = 0;   // nats
    double overlap = 0; // lambda
    bool zero_overlap() const noexcept { return overlap == 0.0; }
};

namespace detail {

inline void check_distribution(std::span<const double> probs, bool require_unit_mass) {
    double s = 0;
    for (double v : probs) {
        if (!std::isfinite(v) || v < 0) throw std::invalid_argument("probabilities must be finite and >= 0");
        s += v;
    }
    if (require_unit_mass ? std::abs(s - 1.0) > 1e-9 : s > 1.0 + 1e-9)
        throw std::invalid_argument("probabilities do not form a distribution");
}

// Sums over the support of p (given as sorted points) restricted to q > 0.
template <class QAt>
GklResult gkl_over(std::span<const Length> xs, std::span<const double> ps, QAt&& q_at) {
    double overlap = 0, sum = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double p = ps[i];
        if (p <= 0) continue;
        const double q = q_at(xs[i]);
        if (q <= 0) continue;
        overlap += p;
        sum += p * std::log(p / q);
    }
    GklResult r;
    r.overlap = overlap;
    r.value = overlap > 0 ? sum - overlap * std::log(overlap) : 0.0;
    return r;
}

} // namespace detail

// Sorted support and matching probabilities.
inline EmpiricalDistribution make_distribution(std::vector<Length> lengths, std::vector<double> probs) {
    if (lengths.size() != probs.size()) throw std::invalid_argument("support and probabilities differ in length");
    if (!std::is_sorted(lengths.begin(), lengths.end()) ||
        std::adjacent_find(lengths.begin(), lengths.end()) != lengths.end())
        throw std::invalid_argument("support must be strictly increasing");
    EmpiricalDistribution d;
    d.lengths = std::move(lengths);
    d.probs = std::move(probs);
    return d;
}

inline GklResult gkl_terms(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
    detail::check_distribution(p.probs, true);
    detail::check_distribution(q.probs, true);
    return detail::gkl_over(p.lengths, p.probs, [&](Length x) { return q.prob(x); });
}

// q may be a truncated model pmf (mass <= 1).
inline GklResult gkl_terms(const EmpiricalDistribution& p, const Pmf& q) {
    detail::check_distribution(p.probs, true);
    detail::check_distribution(q.values, false);
    return detail::gkl_over(p.lengths, p.probs, [&](Length x) { return q(x); });
}

inline double gkl(const EmpiricalDistribution& p, const EmpiricalDistribution& q) { return gkl_terms(p, q).value; }
inline double gkl(const EmpiricalDistribution& p, const Pmf& q) { return gkl_terms(p, q).value; }

inline double gkl_delta(double gkl_value, Tolerance tol) { return std::max(0.0, gkl_value - tol.delta); }
inline bool tolerable(double gkl_value, Tolerance tol) { return gkl_delta(gkl_value, tol) == 0.0; }

template <class Q>
double gkl_delta(const EmpiricalDistribution& p, const Q& q, Tolerance tol) {
    return gkl_delta(gkl(p, q), tol);
}

struct NoiseEstimate {
    double delta = 0; // nats
    SplitKind split = SplitKind::first_second;
    std::uint64_t seed = 0;
    bool zero_overlap = false; // at least one direction had disjoint supports
    Count first_size = 0;
    Count second_size = 0;
};

inline double symmetric_gkl(const EmpiricalDistribution& a, const EmpiricalDistribution& b, bool* zero_overlap = nullptr) {
    const GklResult ab = gkl_terms(a, b), ba = gkl_terms(b, a);
    if (zero_overlap) *zero_overlap = ab.zero_overlap() || ba.zero_overlap();
    return 0.5 * (ab.value + ba.value);
}

// Symmetrized gKL between the empirical distributions of two halves of a
// length stream.
inline NoiseEstimate inherent_noise(std::span<const Length> lengths, SplitKind split = SplitKind::first_second,
                                    std::uint64_t seed = 0) {
    if (lengths.size() < 2) throw input_error("inherent noise needs at least 2 records");
    const Length cutoff = std::max<Length>(1, *std::max_element(lengths.begin(), lengths.end()));
    auto [h1, h2] = split_halves(lengths, split, seed, cutoff);
    NoiseEstimate est;
    est.split = split;
    est.seed = seed;
    est.first_size = h1.size();
    est.second_size = h2.size();
    est.delta = symmetric_gkl(empirical(h1), empirical(h2), &est.zero_overlap);
    return est;
}

} // namespace slen
