#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "slen/walk.hpp"

namespace slen {

// Euclidean projection of v onto { y : y_i >= floor, sum y = 1 }.
inline std::vector<double> project_to_simplex(std::span<const double> v, double floor) {
    const std::size_t d = v.size();
    const double budget = 1.0 - static_cast<double>(d) * floor;
    if (d == 0 || budget < 0) throw std::invalid_argument("simplex floor too large for dimension");
    std::vector<double> z(d);
    for (std::size_t i = 0; i < d; ++i) z[i] = v[i] - floor;
    std::vector<double> sorted(z);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0, theta = 0;
    for (std::size_t i = 0; i < d; ++i) {
        cumulative += sorted[i];
        const double t = (cumulative - budget) / static_cast<double>(i + 1);
        if (sorted[i] - t > 0) theta = t;
    }
    std::vector<double> y(d);
    for (std::size_t i = 0; i < d; ++i) y[i] = std::max(z[i] - theta, 0.0) + floor;
    return y;
}

// Projects each block of a reduced parameter vector (the implied last
// coordinate included) onto the floored simplex.
inline void project_reduced(const ModelStructure& s, std::span<double> w, double floor = kProbabilityFloor) {
    const std::size_t m = s.components();
    const auto block = static_cast<std::size_t>(s.order + 1);
    auto project_block = [&](std::span<double> reduced) {
        std::vector<double> full(reduced.begin(), reduced.end());
        double rest = 1.0;
        for (double v : reduced) rest -= v;
        full.push_back(rest);
        const auto y = project_to_simplex(full, floor);
        std::copy(y.begin(), y.end() - 1, reduced.begin());
    };
    for (std::size_t j = 0; j < m; ++j) project_block(w.subspan(j * block, block));
    if (m > 1) project_block(w.subspan(m * block, m - 1));
}

// Distance from each reduced coordinate to the nearest face it can move
// toward: its own lower bound or its block's implied last coordinate.
inline std::vector<double> reduced_slack(const ModelStructure& s, std::span<const double> w) {
    const std::size_t m = s.components();
    const auto block = static_cast<std::size_t>(s.order + 1);
    std::vector<double> slack(w.size());
    auto fill = [&](std::size_t start, std::size_t len) {
        double rest = 1.0;
        for (std::size_t i = 0; i < len; ++i) rest -= w[start + i];
        for (std::size_t i = 0; i < len; ++i) slack[start + i] = std::min(w[start + i], rest);
    };
    for (std::size_t j = 0; j < m; ++j) fill(j * block, block);
    if (m > 1) fill(m * block, m - 1);
    return slack;
}

} // namespace slen
