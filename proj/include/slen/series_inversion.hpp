#pragma once

// Independent route to the return-time pmf: solve f = x * F(f) as a
// truncated power series by fixed-point iteration, then raise f to the k-th
// power. Each iteration fixes one more coefficient of f, so L iterations give
// f exactly up to degree L. Used as a test oracle for return_time_pmf.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "slen/walk.hpp"

namespace slen {

namespace detail {

inline std::vector<double> series_mul(const std::vector<double>& a, const std::vector<double>& b,
                                      std::size_t degree) {
    std::vector<double> out(degree + 1, 0.0);
    for (std::size_t i = 0; i < a.size() && i <= degree; ++i) {
        if (a[i] == 0.0) continue;
        for (std::size_t j = 0; j < b.size() && i + j <= degree; ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

} // namespace detail

// Generating function of tau_1 up to x^degree.
inline std::vector<double> first_passage_series(const StepLaw& steps, std::size_t degree) {
    const auto probs = steps.probs();
    std::vector<double> f(degree + 1, 0.0);
    for (std::size_t iter = 0; iter < degree; ++iter) {
        // Horner: F(f) = p_{-1} + f (p_0 + f (p_1 + ...))
        std::vector<double> acc(degree + 1, 0.0);
        acc[0] = probs.back();
        for (std::size_t e = probs.size() - 1; e-- > 0;) {
            acc = detail::series_mul(acc, f, degree);
            acc[0] += probs[e];
        }
        // f <- x * F(f)
        std::vector<double> shifted(degree + 1, 0.0);
        for (std::size_t d = 0; d < degree; ++d) shifted[d + 1] = acc[d];
        f.swap(shifted);
    }
    return f;
}

inline Pmf series_inversion_oracle(const WalkComponent& c, Length last) {
    if (last < c.k) throw std::invalid_argument("pmf length L must be >= k");
    const auto degree = static_cast<std::size_t>(last);
    const std::vector<double> f = first_passage_series(c.steps, degree);
    std::vector<double> power{1.0};
    for (int j = 0; j < c.k; ++j) power = detail::series_mul(power, f, degree);
    power.resize(degree + 1, 0.0);
    return {c.k, std::vector<double>(power.begin() + c.k, power.end())};
}

} // namespace slen
