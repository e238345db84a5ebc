#pragma once

// Fitting a mixture of walk components to an empirical length distribution.
//
// The objective is gKL(data, model pmf). Within one model structure the
// covered data mass is fixed, so this is cross entropy over the covered
// lengths up to a constant. Adagrad runs on per-block softmax logits, which
// keep every probability at least kProbabilityFloor.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "slen/divergence.hpp"
#include "slen/error.hpp"
#include "slen/histogram.hpp"
#include "slen/simplex.hpp"
#include "slen/walk.hpp"

namespace slen {

class MixtureObjective {
public:
    MixtureObjective(const EmpiricalDistribution& data, ModelStructure structure)
        : data_(&data), structure_(std::move(structure)) {
        structure_.validate();
        if (data.lengths.empty()) throw input_error("empty data");
        if (structure_.min_valency() > data.max_length())
            throw input_error("model " + structure_.id() + " cannot produce any observed length");
        horizon_ = data.max_length();
    }

    const ModelStructure& structure() const noexcept { return structure_; }
    std::size_t dims() const noexcept { return structure_.dims(); }
    Length horizon() const noexcept { return horizon_; }

    // Full coordinates: every component's (p_{-1}..p_r), then all m weights.
    std::size_t full_dims() const noexcept {
        const std::size_t m = structure_.components();
        return m * static_cast<std::size_t>(structure_.order + 2) + m;
    }

    double value(std::span<const double> w) const { return evaluate(w, {}); }

    // Reduced coordinates; fills `grad` when it is non-empty.
    double evaluate(std::span<const double> w, std::span<double> grad) const {
        const MixtureModel model = from_reduced(structure_, w);
        if (grad.empty()) return evaluate_full(model, {});
        std::vector<double> full(full_dims());
        const double f = evaluate_full(model, full);
        reduce_gradient(full, grad);
        return f;
    }

    void reduce_gradient(std::span<const double> full, std::span<double> reduced) const {
        const std::size_t m = structure_.components();
        const auto width = static_cast<std::size_t>(structure_.order + 2);
        std::size_t o = 0;
        for (std::size_t j = 0; j < m; ++j) {
            const double last = full[j * width + width - 1];
            for (std::size_t e = 0; e + 1 < width; ++e) reduced[o++] = full[j * width + e] - last;
        }
        const double last = full[m * width + m - 1];
        for (std::size_t j = 0; j + 1 < m; ++j) reduced[o++] = full[m * width + j] - last;
    }

    // gKL(data, model pmf); `grad` receives the partial derivatives in full
    // coordinates when it is non-empty.
    double evaluate_full(const MixtureModel& model, std::span<double> grad) const {
        const bool want_grad = !grad.empty();
        const std::size_t m = model.components();
        const auto width = static_cast<std::size_t>(structure_.order + 2);

        std::vector<ReturnTimeTable> tables;
        tables.reserve(m);
        for (std::size_t j = 0; j < m; ++j) {
            const int k = model.valency(j);
            if (k <= horizon_)
                tables.push_back(return_time_table(model.steps(j), k, horizon_, want_grad));
            else
                tables.push_back(ReturnTimeTable{k, horizon_, 0, {}, {}});
        }
        auto component_p = [&](std::size_t j, Length x) {
            const auto& t = tables[j];
            if (x < t.k || t.pmf.empty()) return 0.0;
            return t.pmf[static_cast<std::size_t>(x - t.k)];
        };

        if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
        double overlap = 0, sum = 0;
        const auto& xs = data_->lengths;
        const auto& ps = data_->probs;
        for (std::size_t n = 0; n < xs.size(); ++n) {
            const Length x = xs[n];
            if (x < structure_.min_valency()) continue;
            double q = 0;
            for (std::size_t j = 0; j < m; ++j) q += model.weight(j) * component_p(j, x);
            if (!(q > 0)) continue;
            const double p = ps[n];
            overlap += p;
            sum += p * std::log(p / q);
            if (!want_grad) continue;
            const double c = -p / q;
            for (std::size_t j = 0; j < m; ++j) {
                const auto& t = tables[j];
                if (x < t.k || t.pmf.empty()) continue;
                const double ca = c * model.weight(j);
                for (std::size_t e = 0; e < width; ++e) grad[j * width + e] += ca * t.d(x, e);
                grad[m * width + j] += c * component_p(j, x);
            }
        }
        if (overlap <= 0) return 0.0;
        return sum - overlap * std::log(overlap);
    }

private:
    const EmpiricalDistribution* data_;
    ModelStructure structure_;
    Length horizon_ = 1;
};

// Unconstrained optimizer coordinates: each probability block is
// p = floor + (1 - D*floor) * softmax(z), so z = 0 is the uniform start.
class SoftmaxChart {
public:
    explicit SoftmaxChart(ModelStructure s, double floor = kProbabilityFloor) : s_(std::move(s)), floor_(floor) {}

    std::size_t dims() const noexcept {
        const std::size_t m = s_.components();
        return m * static_cast<std::size_t>(s_.order + 2) + m;
    }

    MixtureModel model(std::span<const double> z) const {
        const std::size_t m = s_.components();
        const auto width = static_cast<std::size_t>(s_.order + 2);
        std::vector<StepLaw> steps;
        for (std::size_t j = 0; j < m; ++j) steps.emplace_back(block(z.subspan(j * width, width)));
        return MixtureModel(s_.valencies, block(z.subspan(m * width, m)), std::move(steps));
    }

    // Chain rule from full-coordinate partials to logit partials.
    void pull_back(std::span<const double> z, std::span<const double> full, std::span<double> out) const {
        const std::size_t m = s_.components();
        const auto width = static_cast<std::size_t>(s_.order + 2);
        auto one = [&](std::size_t start, std::size_t len) {
            const auto sm = softmax(z.subspan(start, len));
            const double scale = 1.0 - static_cast<double>(len) * floor_;
            double mean = 0;
            for (std::size_t i = 0; i < len; ++i) mean += sm[i] * full[start + i];
            for (std::size_t i = 0; i < len; ++i) out[start + i] = scale * sm[i] * (full[start + i] - mean);
        };
        for (std::size_t j = 0; j < m; ++j) one(j * width, width);
        one(m * width, m);
    }

private:
    static std::vector<double> softmax(std::span<const double> z) {
        const double top = *std::max_element(z.begin(), z.end());
        std::vector<double> e(z.size());
        double s = 0;
        for (std::size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp(z[i] - top));
        for (double& v : e) v /= s;
        return e;
    }

    std::vector<double> block(std::span<const double> z) const {
        auto p = softmax(z);
        const double scale = 1.0 - static_cast<double>(z.size()) * floor_;
        // each entry directly: 1 - sum would cancel for a last entry at the floor
        for (double& v : p) v = floor_ + scale * v;
        return p;
    }

    ModelStructure s_;
    double floor_;
};

struct FitConfig {
    double learning_rate = 0.9;
    double fallback_rate = 0.1;
    double grad_tol = 1e-3;
    int max_iters = 10000;
    int fallback_iters = 10000;
    int oscillation_window = 50;
    std::uint64_t seed = 0; // the start is deterministic; kept for the run manifest

    void validate() const {
        if (!(learning_rate > 0) || !(fallback_rate > 0)) throw std::invalid_argument("learning rates must be > 0");
        if (!(grad_tol > 0)) throw std::invalid_argument("grad_tol must be > 0");
        if (max_iters < 1 || fallback_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
        if (oscillation_window < 1) throw std::invalid_argument("oscillation window must be >= 1");
    }
};

struct FitResult {
    MixtureModel model;
    double objective = 0; // gKL(data, model pmf), nats
    int iters = 0;        // both runs together
    bool converged = false;
    bool used_fallback = false;
    double grad_norm = 0;         // max-norm of the optimizer gradient at the returned point
    double reduced_grad_norm = 0; // max-norm of the reduced-coordinate gradient there
};

namespace detail {

struct AdagradRun {
    std::vector<double> best_z;
    double best_value = std::numeric_limits<double>::infinity();
    double best_grad_norm = 0;
    int iters = 0;
    bool converged = false;
    bool unstable = false;
};

inline double max_abs(std::span<const double> v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Adagrad with a zero-initialized accumulator. Stops when every gradient
// coordinate is within grad_tol, or reports instability when the objective
// exceeds its value `window` iterations earlier.
inline AdagradRun adagrad(const MixtureObjective& objective, const SoftmaxChart& chart, double rate, int max_iters,
                          int window, double grad_tol) {
    const std::string& id = objective.structure().id();
    std::vector<double> z(chart.dims(), 0.0), full(objective.full_dims()), g(chart.dims()), accum(chart.dims(), 0.0);
    std::vector<double> history;
    AdagradRun run;
    for (int it = 0; it < max_iters; ++it) {
        const double f = objective.evaluate_full(chart.model(z), full);
        if (!std::isfinite(f)) throw numerical_error("non-finite objective fitting " + id);
        chart.pull_back(z, full, g);
        for (double gi : g)
            if (!std::isfinite(gi)) throw numerical_error("non-finite gradient fitting " + id);
        ++run.iters;
        history.push_back(f);
        const double norm = max_abs(g);
        if (norm <= grad_tol) {
            run.best_value = f;
            run.best_z = z;
            run.best_grad_norm = norm;
            run.converged = true;
            return run;
        }
        if (f < run.best_value) {
            run.best_value = f;
            run.best_z = z;
            run.best_grad_norm = norm;
        }
        const auto n = history.size();
        if (n > static_cast<std::size_t>(window) && f > history[n - 1 - static_cast<std::size_t>(window)]) {
            run.unstable = true;
            return run;
        }
        for (std::size_t i = 0; i < z.size(); ++i) {
            accum[i] += g[i] * g[i];
            z[i] -= rate * g[i] / std::sqrt(accum[i] + 1e-12);
        }
    }
    return run;
}

} // namespace detail

inline FitResult fit(const EmpiricalDistribution& data, const ModelStructure& structure, const FitConfig& cfg = {}) {
    cfg.validate();
    const MixtureObjective objective(data, structure);
    const SoftmaxChart chart(structure);
    detail::AdagradRun run =
        detail::adagrad(objective, chart, cfg.learning_rate, cfg.max_iters, cfg.oscillation_window, cfg.grad_tol);
    int iters = run.iters;
    bool fallback = false;
    if (run.unstable) {
        fallback = true;
        // no second restart: the instability check is off for the fallback run
        detail::AdagradRun retry =
            detail::adagrad(objective, chart, cfg.fallback_rate, cfg.fallback_iters, cfg.fallback_iters, cfg.grad_tol);
        iters += retry.iters;
        if (retry.converged || retry.best_value <= run.best_value) run = std::move(retry);
    }
    FitResult r;
    r.model = chart.model(run.best_z);
    r.iters = iters;
    r.converged = run.converged;
    r.used_fallback = fallback;
    r.grad_norm = run.best_grad_norm;
    std::vector<double> full(objective.full_dims()), reduced(objective.dims());
    objective.evaluate_full(r.model, full);
    objective.reduce_gradient(full, reduced);
    r.reduced_grad_norm = detail::max_abs(reduced);
    r.objective = gkl(data, mixture_pmf(r.model, data.max_length()));
    if (!std::isfinite(r.objective)) throw numerical_error("non-finite objective fitting " + structure.id());
    return r;
}

struct FitAttempt {
    ModelStructure structure;
    std::optional<FitResult> result;
    std::string error; // set when the template could not be fitted
};

// Fits every structure independently; results keep the order of `structures`.
inline std::vector<FitAttempt> fit_all(const EmpiricalDistribution& data, const std::vector<ModelStructure>& structures,
                                       const FitConfig& cfg = {}, unsigned threads = 0) {
    std::vector<FitAttempt> out(structures.size());
    for (std::size_t i = 0; i < structures.size(); ++i) out[i].structure = structures[i];
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, structures.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < structures.size(); i = next++) {
            try {
                out[i].result = fit(data, structures[i], cfg);
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    return out;
}

} // namespace slen
