#pragma once

// Return times of bounded-step random walks and their mixtures.
//
// A walk starts at height k and moves by s in {-1, 0, ..., r} with
// probability p_s. With F(u) = sum_s p_s u^{s+1}, Lagrange inversion gives
//
//     P(tau_k = i) = (k / i) [u^{i-k}] F(u)^i,
//
// so every pmf entry is a coefficient of a power of a polynomial and is a
// polynomial in the step probabilities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "slen/error.hpp"
#include "slen/histogram.hpp"

namespace slen {

// Parameters are kept at least this far inside every probability simplex.
inline constexpr double kProbabilityFloor = 1e-6;
inline constexpr int kMaxOrder = 3;
inline constexpr int kMaxValency = 5;

class StepLaw {
public:
    StepLaw() : StepLaw(uniform(1)) {}

    // probs = (p_{-1}, p_0, ..., p_r)
    explicit StepLaw(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.size() < 3 || probs_.size() > kMaxOrder + 2)
            throw std::invalid_argument("step law needs between 3 and " +
                                        std::to_string(kMaxOrder + 2) + " entries");
        double sum = 0;
        for (double p : probs_) {
            if (!std::isfinite(p) || p < 0)
                throw std::invalid_argument("step probabilities must be finite and >= 0");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("step probabilities must sum to 1");
    }

    static StepLaw uniform(int order) {
        if (order < 1 || order > kMaxOrder) throw std::invalid_argument("order must be 1..3");
        const auto d = static_cast<std::size_t>(order + 2);
        return StepLaw(std::vector<double>(d, 1.0 / static_cast<double>(d)));
    }

    int order() const noexcept { return static_cast<int>(probs_.size()) - 2; }
    std::size_t size() const noexcept { return probs_.size(); }
    std::span<const double> probs() const noexcept { return probs_; }

    // Probability of step s, s in [-1, order].
    double at(int step) const { return probs_.at(static_cast<std::size_t>(step + 1)); }

    double drift() const noexcept {
        double m = 0;
        for (std::size_t e = 0; e < probs_.size(); ++e)
            m += (static_cast<double>(e) - 1.0) * probs_[e];
        return m;
    }

    friend bool operator==(const StepLaw&, const StepLaw&) = default;

private:
    std::vector<double> probs_;
};

struct WalkComponent {
    int k = 1;
    StepLaw steps;
};

// Order plus the set of total valencies, e.g. "1.k2.5" or "3.k1-5".
struct ModelStructure {
    int order = 1;
    std::vector<int> valencies;

    ModelStructure() = default;
    ModelStructure(int order_, std::vector<int> valencies_)
        : order(order_), valencies(std::move(valencies_)) {
        validate();
    }

    void validate() const {
        if (order < 1 || order > kMaxOrder) throw std::invalid_argument("order must be 1..3");
        if (valencies.empty()) throw std::invalid_argument("model needs at least one component");
        for (std::size_t j = 0; j < valencies.size(); ++j) {
            if (valencies[j] < 1 || valencies[j] > kMaxValency)
                throw std::invalid_argument("valency must be 1..5");
            if (j > 0 && valencies[j] <= valencies[j - 1])
                throw std::invalid_argument("valencies must be strictly increasing");
        }
    }

    std::size_t components() const noexcept { return valencies.size(); }
    int min_valency() const { return valencies.front(); }

    // Free continuous parameters in reduced simplex coordinates.
    std::size_t dims() const noexcept {
        const std::size_t m = valencies.size();
        return m * static_cast<std::size_t>(order + 1) + (m - 1);
    }

    // Runs of three or more consecutive valencies are written as a range.
    std::string id() const {
        std::string out = std::to_string(order) + ".k";
        std::size_t j = 0;
        bool first = true;
        while (j < valencies.size()) {
            std::size_t run = j;
            while (run + 1 < valencies.size() && valencies[run + 1] == valencies[run] + 1) ++run;
            auto emit = [&](const std::string& s) {
                if (!first) out += '.';
                out += s;
                first = false;
            };
            if (run - j >= 2) {
                emit(std::to_string(valencies[j]) + "-" + std::to_string(valencies[run]));
            } else {
                for (std::size_t t = j; t <= run; ++t) emit(std::to_string(valencies[t]));
            }
            j = run + 1;
        }
        return out;
    }

    friend bool operator==(const ModelStructure&, const ModelStructure&) = default;
};

// Accepts both "1.k2.3.4" and "1.k2-4".
inline ModelStructure parse_model_id(const std::string& id) {
    auto fail = [&] { return input_error("malformed model id '" + id + "'"); };
    auto dot = id.find(".k");
    if (dot == std::string::npos || dot == 0) throw fail();
    int order = 0;
    try {
        std::size_t pos = 0;
        order = std::stoi(id.substr(0, dot), &pos);
        if (pos != dot) throw fail();
    } catch (const std::invalid_argument&) {
        throw fail();
    }
    std::vector<int> ks;
    std::string rest = id.substr(dot + 2);
    if (rest.empty()) throw fail();
    std::size_t start = 0;
    while (start <= rest.size()) {
        auto end = rest.find('.', start);
        std::string tok = rest.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (tok.empty()) throw fail();
        auto dash = tok.find('-');
        auto digit = [&](const std::string& s) {
            if (s.size() != 1 || s[0] < '1' || s[0] > '9') throw fail();
            return s[0] - '0';
        };
        if (dash == std::string::npos) {
            ks.push_back(digit(tok));
        } else {
            int a = digit(tok.substr(0, dash)), b = digit(tok.substr(dash + 1));
            if (b <= a) throw fail();
            for (int v = a; v <= b; ++v) ks.push_back(v);
        }
        if (end == std::string::npos) break;
        start = end + 1;
    }
    try {
        return ModelStructure(order, ks);
    } catch (const std::invalid_argument&) {
        throw fail();
    }
}

// All nonempty valency subsets of {1..5} for orders 1..3, ordered by id.
inline std::vector<ModelStructure> model_family(std::span<const int> orders = {}) {
    std::vector<int> default_orders{1, 2, 3};
    if (orders.empty()) orders = default_orders;
    std::vector<ModelStructure> out;
    for (int order : orders) {
        for (unsigned mask = 1; mask < (1u << kMaxValency); ++mask) {
            std::vector<int> ks;
            for (int k = 1; k <= kMaxValency; ++k)
                if (mask & (1u << (k - 1))) ks.push_back(k);
            out.emplace_back(order, ks);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const ModelStructure& a, const ModelStructure& b) { return a.id() < b.id(); });
    return out;
}

class MixtureModel {
public:
    MixtureModel() = default;

    MixtureModel(std::vector<int> valencies, std::vector<double> weights, std::vector<StepLaw> steps)
        : weights_(std::move(weights)), steps_(std::move(steps)) {
        if (steps_.empty()) throw std::invalid_argument("model needs at least one component");
        structure_ = ModelStructure(steps_.front().order(), std::move(valencies));
        if (weights_.size() != structure_.components() || steps_.size() != structure_.components())
            throw std::invalid_argument("valencies, weights and step laws differ in length");
        double sum = 0;
        for (std::size_t j = 0; j < steps_.size(); ++j) {
            if (steps_[j].order() != structure_.order)
                throw std::invalid_argument("all components must share one order");
            if (!std::isfinite(weights_[j]) || weights_[j] <= 0)
                throw std::invalid_argument("mixture weights must be positive");
            sum += weights_[j];
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("mixture weights must sum to 1");
    }

    static MixtureModel single(int k, StepLaw steps) {
        return MixtureModel({k}, {1.0}, {std::move(steps)});
    }

    // Uniform weights and uniform step laws.
    static MixtureModel uniform(const ModelStructure& s) {
        s.validate();
        const std::size_t m = s.components();
        return MixtureModel(s.valencies, std::vector<double>(m, 1.0 / static_cast<double>(m)),
                            std::vector<StepLaw>(m, StepLaw::uniform(s.order)));
    }

    const ModelStructure& structure() const noexcept { return structure_; }
    std::string id() const { return structure_.id(); }
    int order() const noexcept { return structure_.order; }
    std::size_t components() const noexcept { return steps_.size(); }
    int valency(std::size_t j) const { return structure_.valencies.at(j); }
    double weight(std::size_t j) const { return weights_.at(j); }
    const StepLaw& steps(std::size_t j) const { return steps_.at(j); }
    std::span<const double> weights() const noexcept { return weights_; }
    WalkComponent component(std::size_t j) const { return {valency(j), steps(j)}; }

    friend bool operator==(const MixtureModel&, const MixtureModel&) = default;

private:
    ModelStructure structure_;
    std::vector<double> weights_;
    std::vector<StepLaw> steps_;
};

// P(tau = i) for i = first .. last().
struct Pmf {
    Length first = 1;
    std::vector<double> values;

    Length last() const noexcept { return first + static_cast<Length>(values.size()) - 1; }
    double operator()(Length i) const noexcept {
        if (i < first || i > last()) return 0.0;
        return values[static_cast<std::size_t>(i - first)];
    }
    double mass() const noexcept {
        double s = 0;
        for (double v : values) s += v;
        return s;
    }
};

// Coefficients of F(u), ascending: coefficient of u^{s+1} is p_s.
inline std::vector<double> step_poly(const StepLaw& s) {
    return {s.probs().begin(), s.probs().end()};
}

// Return-time probabilities of one component together with their partial
// derivatives in full step coordinates:
//
//     dP(tau_k = i)/dp_s = k [u^{i-k-s-1}] F(u)^{i-1}.
struct ReturnTimeTable {
    int k = 1;
    Length last = 1;
    std::size_t width = 0;          // r + 2
    std::vector<double> pmf;        // i = k .. last
    std::vector<double> derivative; // row i-k, column s+1; empty unless requested

    double d(Length i, std::size_t e) const {
        return derivative[static_cast<std::size_t>(i - k) * width + e];
    }
};

inline ReturnTimeTable return_time_table(const StepLaw& steps, int k, Length last,
                                         bool with_derivative = false) {
    if (k < 1) throw std::invalid_argument("valency must be >= 1");
    if (last < k) throw std::invalid_argument("pmf length L must be >= k");
    const std::vector<double> f = step_poly(steps);
    const std::size_t width = f.size();
    const auto max_deg = static_cast<std::size_t>(last - k);

    ReturnTimeTable t;
    t.k = k;
    t.last = last;
    t.width = width;
    t.pmf.assign(max_deg + 1, 0.0);
    if (with_derivative) t.derivative.assign((max_deg + 1) * width, 0.0);

    // power holds F^{i-1} truncated at degree max_deg
    std::vector<double> power(max_deg + 1, 0.0), next(max_deg + 1, 0.0);
    power[0] = 1.0;
    std::size_t deg = 0;
    for (Length i = 1; i <= last; ++i) {
        if (with_derivative && i >= k) {
            const auto row = static_cast<std::size_t>(i - k);
            double* out = &t.derivative[row * width];
            for (std::size_t e = 0; e < width && e <= row; ++e) {
                const std::size_t j = row - e;
                if (j <= deg) out[e] = static_cast<double>(k) * power[j];
            }
        }
        const std::size_t new_deg = std::min(max_deg, deg + width - 1);
        std::fill(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(new_deg + 1), 0.0);
        for (std::size_t e = 0; e < width; ++e) {
            const double c = f[e];
            if (c == 0.0 || e > new_deg) continue;
            const std::size_t top = std::min(deg, new_deg - e);
            for (std::size_t d = 0; d <= top; ++d) next[d + e] += c * power[d];
        }
        power.swap(next);
        deg = new_deg;
        if (i >= k) {
            const auto row = static_cast<std::size_t>(i - k);
            t.pmf[row] = static_cast<double>(k) / static_cast<double>(i) * power[row];
        }
    }
    return t;
}

inline Pmf return_time_pmf(const WalkComponent& c, Length last) {
    if (last < c.k) throw std::invalid_argument("pmf length L must be >= k");
    return {c.k, return_time_table(c.steps, c.k, last).pmf};
}

inline Pmf mixture_pmf(const MixtureModel& m, Length last) {
    const int kmin = m.structure().min_valency();
    if (last < kmin) throw std::invalid_argument("pmf length L below minimal valency");
    Pmf out{kmin, std::vector<double>(static_cast<std::size_t>(last - kmin + 1), 0.0)};
    for (std::size_t j = 0; j < m.components(); ++j) {
        const int k = m.valency(j);
        if (k > last) continue;
        const auto t = return_time_table(m.steps(j), k, last);
        const auto offset = static_cast<std::size_t>(k - kmin);
        for (std::size_t r = 0; r < t.pmf.size(); ++r) out.values[offset + r] += m.weight(j) * t.pmf[r];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reduced simplex coordinates.
//
// Each probability block (a component's step law, then the mixture weights)
// drops its last entry, which is implied as one minus the rest. The layout is
//   [p_{-1}..p_{r-1} of component 0] ... [component m-1] [alpha_0..alpha_{m-2}].

inline std::vector<double> to_reduced(const MixtureModel& m) {
    std::vector<double> w;
    w.reserve(m.structure().dims());
    for (std::size_t j = 0; j < m.components(); ++j) {
        auto p = m.steps(j).probs();
        w.insert(w.end(), p.begin(), p.end() - 1);
    }
    auto a = m.weights();
    w.insert(w.end(), a.begin(), a.end() - 1);
    return w;
}

namespace detail {

inline std::vector<double> complete_block(std::span<const double> reduced) {
    std::vector<double> full(reduced.begin(), reduced.end());
    double rest = 1.0;
    for (double v : reduced) rest -= v;
    full.push_back(rest);
    return full;
}

} // namespace detail

inline MixtureModel from_reduced(const ModelStructure& s, std::span<const double> w) {
    if (w.size() != s.dims()) throw std::invalid_argument("reduced parameter vector has wrong size");
    const std::size_t m = s.components();
    const auto block = static_cast<std::size_t>(s.order + 1);
    std::vector<StepLaw> steps;
    steps.reserve(m);
    for (std::size_t j = 0; j < m; ++j)
        steps.emplace_back(detail::complete_block(w.subspan(j * block, block)));
    return MixtureModel(s.valencies, detail::complete_block(w.subspan(m * block)), std::move(steps));
}

// Row i - first holds the gradient of the mixture pmf entry i in reduced coordinates.
struct PmfGradient {
    Length first = 1;
    std::size_t dims = 0;
    std::vector<double> values;

    std::span<const double> row(Length i) const {
        return std::span<const double>(values).subspan(static_cast<std::size_t>(i - first) * dims, dims);
    }
};

inline PmfGradient pmf_gradient(const MixtureModel& m, Length last) {
    const ModelStructure& s = m.structure();
    const int kmin = s.min_valency();
    if (last < kmin) throw std::invalid_argument("pmf length L below minimal valency");
    const std::size_t dims = s.dims();
    const std::size_t comps = m.components();
    const auto block = static_cast<std::size_t>(s.order + 1);
    const auto rows = static_cast<std::size_t>(last - kmin + 1);
    PmfGradient g{kmin, dims, std::vector<double>(rows * dims, 0.0)};

    std::vector<std::vector<double>> component_pmf(comps, std::vector<double>(rows, 0.0));
    for (std::size_t j = 0; j < comps; ++j) {
        const int k = m.valency(j);
        if (k > last) continue;
        const auto t = return_time_table(m.steps(j), k, last, true);
        const double alpha = m.weight(j);
        for (Length i = k; i <= last; ++i) {
            const auto row = static_cast<std::size_t>(i - kmin);
            component_pmf[j][row] = t.pmf[static_cast<std::size_t>(i - k)];
            double* out = &g.values[row * dims + j * block];
            const double d_last = t.d(i, t.width - 1);
            for (std::size_t e = 0; e + 1 < t.width; ++e) out[e] = alpha * (t.d(i, e) - d_last);
        }
    }
    for (std::size_t row = 0; row < rows; ++row)
        for (std::size_t j = 0; j + 1 < comps; ++j)
            g.values[row * dims + comps * block + j] = component_pmf[j][row] - component_pmf[comps - 1][row];
    return g;
}

} // namespace slen
