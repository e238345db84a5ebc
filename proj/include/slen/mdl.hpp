#pragma once

// Minimum description length comparison. Every continuous parameter is
// rounded to a log-scale grid of 2^b points spanning [2^-16, 1], each
// probability block is renormalized, and the model is kept only while the
// quantized version stays within tolerance of the data. The model needing
// the fewest bits wins.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slen/divergence.hpp"
#include "slen/evidence.hpp"
#include "slen/fit.hpp"
#include "slen/walk.hpp"

namespace slen {

inline constexpr int kMinQuantBits = 1;
inline constexpr int kMaxQuantBits = 16;
inline constexpr double kLogGridLow = -16.0 * std::numbers::ln2; // ln 2^-16

// 2 bits of order, a 5-bit valency bitmap and a 4-bit auxiliary size cap.
inline constexpr int kHeaderBits = 2 + 5 + 4;

// 2^bits points evenly spaced in log space over [exp(low), 1].
class LogGrid {
public:
    explicit LogGrid(int bits, double low = kLogGridLow) : bits_(bits), low_(low) {
        if (bits < kMinQuantBits || bits > kMaxQuantBits) throw std::invalid_argument("quantization bits must be 1..16");
        if (!(low < 0) || !std::isfinite(low)) throw std::invalid_argument("grid lower end must be below 1");
        points_ = std::uint32_t{1} << bits;
        step_ = -low_ / static_cast<double>(points_ - 1);
    }

    int bits() const noexcept { return bits_; }
    std::uint32_t points() const noexcept { return points_; }
    double low() const noexcept { return low_; }

    std::uint32_t encode(double p) const {
        if (!(p > 0)) return 0;
        const double pos = (std::log(p) - low_) / step_;
        const double c = std::clamp(std::round(pos), 0.0, static_cast<double>(points_ - 1));
        return static_cast<std::uint32_t>(c);
    }

    double decode(std::uint32_t code) const {
        if (code == points_ - 1) return 1.0;
        return std::exp(low_ + static_cast<double>(code) * step_);
    }

private:
    int bits_;
    double low_;
    std::uint32_t points_ = 2;
    double step_ = 1;
};

struct QuantizedBlock {
    std::vector<std::uint32_t> codes;
    std::vector<double> values; // decoded and renormalized
};

inline QuantizedBlock quantize_block(std::span<const double> probs, const LogGrid& grid) {
    QuantizedBlock b;
    double sum = 0;
    for (double p : probs) {
        const auto c = grid.encode(p);
        b.codes.push_back(c);
        b.values.push_back(grid.decode(c));
        sum += b.values.back();
    }
    for (double& v : b.values) v /= sum;
    return b;
}

struct QuantizedModel {
    ModelStructure structure;
    int bits_per_param = 0;
    std::vector<std::uint32_t> codes; // every stored coordinate, blocks in reduced-layout order then aux
    std::size_t free_params = 0;      // d' of the augmented model
    std::int64_t total_bits = 0;
    MixtureModel model;        // renormalized
    AugmentedModel augmented;  // base = model, q quantized
    double gkl = 0;            // against the data it was checked on
};

// gKL between the data and the augmented model lambda*Q on covered lengths,
// (1-lambda)*q on the rest. Equals gkl(data, Q) when q is the exact optimum.
inline double augmented_gkl(const EmpiricalDistribution& data, const AugmentedModel& a) {
    double sum = 0;
    const int kmin = a.base.structure().min_valency();
    std::optional<Pmf> pmf;
    if (data.max_length() >= kmin) pmf = mixture_pmf(a.base, data.max_length());
    for (std::size_t i = 0; i < data.lengths.size(); ++i) {
        const Length x = data.lengths[i];
        const double p = data.probs[i];
        auto it = std::lower_bound(a.uncovered.begin(), a.uncovered.end(), x);
        double q;
        if (it != a.uncovered.end() && *it == x)
            q = (1.0 - a.lambda) * a.q[static_cast<std::size_t>(it - a.uncovered.begin())];
        else
            q = a.lambda * (pmf ? (*pmf)(x) : 0.0);
        if (q > 0) sum += p * std::log(p / q);
    }
    return sum;
}

inline QuantizedModel quantize(const AugmentedModel& a, int bits) {
    const LogGrid grid(bits);
    const MixtureModel& m = a.base;
    QuantizedModel out;
    out.structure = m.structure();
    out.bits_per_param = bits;

    std::vector<StepLaw> steps;
    for (std::size_t j = 0; j < m.components(); ++j) {
        auto b = quantize_block(m.steps(j).probs(), grid);
        out.codes.insert(out.codes.end(), b.codes.begin(), b.codes.end());
        steps.emplace_back(std::move(b.values));
    }
    std::vector<double> weights{1.0};
    if (m.components() > 1) {
        auto b = quantize_block(m.weights(), grid);
        out.codes.insert(out.codes.end(), b.codes.begin(), b.codes.end());
        weights = std::move(b.values);
    }
    out.model = MixtureModel(m.structure().valencies, std::move(weights), std::move(steps));

    out.augmented = a;
    out.augmented.base = out.model;
    if (a.aux_points() >= 2) {
        auto b = quantize_block(a.q, grid);
        out.codes.insert(out.codes.end(), b.codes.begin(), b.codes.end());
        out.augmented.q = std::move(b.values);
    }
    out.free_params = augmented_dims(out.structure, a.aux_points());
    out.total_bits = static_cast<std::int64_t>(bits) * static_cast<std::int64_t>(out.free_params) + kHeaderBits;
    return out;
}

// Smallest bit depth whose quantized model is still tolerable, if any.
inline std::optional<QuantizedModel> min_bits(const EmpiricalDistribution& data, const MixtureModel& model, Tolerance tol) {
    const AugmentedModel a = augment(data, model);
    for (int b = kMinQuantBits; b <= kMaxQuantBits; ++b) {
        QuantizedModel q = quantize(a, b);
        q.gkl = augmented_gkl(data, q.augmented);
        if (tolerable(q.gkl, tol)) return q;
    }
    return std::nullopt;
}

struct NaiveQuantization {
    int bits_per_param = 0;
    std::size_t free_params = 0; // support size - 1
    std::int64_t total_bits = 0;
    double gkl = 0;
    int grid_low_log2 = -16; // the grid spans [2^grid_low_log2, 1]
};

// Lower grid end for the naive model: 2^-16, or lower when the data holds
// smaller probabilities (a large corpus has many lengths seen once). Clamping
// those up to 2^-16 would inflate the renormalized error beyond any bit depth.
inline int naive_grid_low_log2(const EmpiricalDistribution& data) {
    const double smallest = *std::min_element(data.probs.begin(), data.probs.end());
    return std::min(-16, static_cast<int>(std::floor(std::log2(smallest))));
}

// The empirical distribution itself, quantized the same way.
inline std::optional<NaiveQuantization> naive_bits(const EmpiricalDistribution& data, Tolerance tol) {
    if (data.lengths.empty()) throw input_error("empty data");
    NaiveQuantization out;
    out.free_params = data.support_size() - 1;
    if (out.free_params == 0) return out;
    out.grid_low_log2 = naive_grid_low_log2(data);
    const double low = out.grid_low_log2 * std::numbers::ln2;
    for (int b = kMinQuantBits; b <= kMaxQuantBits; ++b) {
        const auto block = quantize_block(data.probs, LogGrid(b, low));
        double g = 0;
        for (std::size_t i = 0; i < data.probs.size(); ++i)
            g += data.probs[i] * std::log(data.probs[i] / block.values[i]);
        if (tolerable(g, tol)) {
            out.bits_per_param = b;
            out.gkl = g;
            out.total_bits = static_cast<std::int64_t>(b) * static_cast<std::int64_t>(out.free_params);
            return out;
        }
    }
    return std::nullopt;
}

struct MdlRow {
    std::string id;
    double gkl = 0;                       // unquantized
    std::optional<QuantizedModel> quantized;
};

struct MdlReport {
    double delta = 0;
    std::vector<MdlRow> rows; // ordered by model id
    std::optional<NaiveQuantization> naive;
    std::optional<std::string> winner;

    const MdlRow* find(const std::string& id) const {
        for (const auto& r : rows)
            if (r.id == id) return &r;
        return nullptr;
    }
};

inline MdlReport mdl_compare(const EmpiricalDistribution& data, std::span<const FitAttempt> fits, Tolerance tol,
                             const std::vector<std::string>& exclude = {}) {
    MdlReport r;
    r.delta = tol.delta;
    r.naive = naive_bits(data, tol);
    for (const auto& f : fits) {
        if (!f.result) continue;
        const std::string id = f.structure.id();
        if (std::find(exclude.begin(), exclude.end(), id) != exclude.end()) continue;
        r.rows.push_back({id, f.result->objective, min_bits(data, f.result->model, tol)});
    }
    std::sort(r.rows.begin(), r.rows.end(), [](const MdlRow& a, const MdlRow& b) { return a.id < b.id; });
    const MdlRow* best = nullptr;
    for (const auto& row : r.rows) {
        if (!row.quantized) continue;
        if (!best) { best = &row; continue; }
        const auto& a = *row.quantized;
        const auto& b = *best->quantized;
        if (a.total_bits != b.total_bits ? a.total_bits < b.total_bits : a.gkl < b.gkl) best = &row;
    }
    if (best) r.winner = best->id;
    return r;
}

} // namespace slen
