#pragma once

// Tolerance-aware Bayesian model comparison.
//
// Each fitted model is extended with an auxiliary distribution over the
// observed lengths it cannot produce. Its Laplace-approximated evidence, with
// the data entropy subtracted and scaled by -1/n, is
//
//   total(n) = gKL_delta(data, model)
//            + (ln Vol(model) + ln Vol(aux)) / n
//            + (ln det H_model + ln det H_aux) / (2n)
//            + d' / (2n) * ln(n / 2 pi)
//
// Smaller is better. As n -> infinity the ordering becomes lexicographic:
// tolerable before non-tolerable, then fewer parameters, then volume and
// Hessian.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slen/divergence.hpp"
#include "slen/fit.hpp"
#include "slen/simplex.hpp"
#include "slen/walk.hpp"

namespace slen {

struct AugmentedModel {
    MixtureModel base;
    double lambda = 1;               // covered data mass
    std::vector<Length> uncovered;   // observed lengths with zero model probability
    std::vector<double> q;           // auxiliary distribution over `uncovered`

    std::size_t aux_points() const noexcept { return uncovered.size(); }
    std::size_t aux_dims() const noexcept { return uncovered.size() >= 2 ? uncovered.size() - 1 : 0; }
    bool zero_overlap() const noexcept { return lambda == 0.0; }
};

// The auxiliary part reproduces the uncovered data exactly: q_x = p_x / (1 - lambda).
inline AugmentedModel augment(const EmpiricalDistribution& data, const MixtureModel& model) {
    if (data.lengths.empty()) throw input_error("empty data");
    AugmentedModel a;
    a.base = model;
    a.lambda = 0;
    const int kmin = model.structure().min_valency();
    std::optional<Pmf> pmf;
    if (data.max_length() >= kmin) pmf = mixture_pmf(model, data.max_length());
    for (std::size_t i = 0; i < data.lengths.size(); ++i) {
        const Length x = data.lengths[i];
        if (pmf && (*pmf)(x) > 0) {
            a.lambda += data.probs[i];
        } else {
            a.uncovered.push_back(x);
            a.q.push_back(data.probs[i]);
        }
    }
    if (!a.uncovered.empty()) {
        double mass = 0;
        for (double p : a.q) mass += p;
        for (double& v : a.q) v /= mass;
        a.lambda = std::max(0.0, 1.0 - mass);
    }
    return a;
}

// ln of the parameter-space volume in reduced coordinates: each simplex block
// with D entries contributes 1/(D-1)!.
inline double ln_simplex_volume(std::size_t entries) {
    if (entries <= 1) return 0.0;
    return -std::lgamma(static_cast<double>(entries)); // -ln (D-1)!
}

inline double ln_model_volume(const ModelStructure& s) {
    const std::size_t m = s.components();
    return static_cast<double>(m) * ln_simplex_volume(static_cast<std::size_t>(s.order + 2)) + ln_simplex_volume(m);
}

inline double ln_aux_volume(std::size_t aux_points) {
    return aux_points >= 2 ? ln_simplex_volume(aux_points) : 0.0;
}

// Free parameters of the augmented model.
inline std::size_t augmented_dims(const ModelStructure& s, std::size_t aux_points) {
    return s.dims() + (aux_points >= 2 ? aux_points - 1 : 0);
}

// ln det of the Hessian of -sum_x p_x ln((1 - lambda) q_x) in reduced
// coordinates at q_x = p_x / (1 - lambda):
//   (2u - 1) ln(1 - lambda) - sum_x ln p_x.
inline double aux_hessian_logdet(const AugmentedModel& a, const EmpiricalDistribution& data) {
    const std::size_t u = a.aux_points();
    if (u < 2) return 0.0;
    const double uncovered = 1.0 - a.lambda;
    double s = (2.0 * static_cast<double>(u) - 1.0) * std::log(uncovered);
    for (Length x : a.uncovered) s -= std::log(data.prob(x));
    return s;
}

inline constexpr double kHessianStep = 1e-4;
inline constexpr double kHessianJitter = 1e-9;

struct HessianResult {
    double ln_det = 0;
    double min_eigenvalue = 0;
    bool reliable = true;
};

// Model-block Hessian of the cross entropy by central differences of the
// analytic gradient. The step shrinks near a face of the simplex so both
// evaluation points stay feasible.
inline Eigen::MatrixXd model_hessian(const EmpiricalDistribution& data, const MixtureModel& model) {
    const MixtureObjective objective(data, model.structure());
    const std::vector<double> w = to_reduced(model);
    const std::vector<double> slack = reduced_slack(model.structure(), w);
    const std::size_t d = w.size();
    Eigen::MatrixXd h(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    std::vector<double> plus(w), minus(w), gp(d), gm(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double step = std::min(kHessianStep, 0.5 * slack[i]);
        if (!(step > 0)) throw numerical_error("parameter on the simplex boundary in " + model.id());
        plus = w;
        minus = w;
        plus[i] += step;
        minus[i] -= step;
        objective.evaluate(plus, gp);
        objective.evaluate(minus, gm);
        for (std::size_t r = 0; r < d; ++r)
            h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = (gp[r] - gm[r]) / (2 * step);
    }
    return 0.5 * (h + h.transpose());
}

inline HessianResult hessian_logdet(const EmpiricalDistribution& data, const MixtureModel& model) {
    Eigen::MatrixXd h = model_hessian(data, model);
    h.diagonal().array() += kHessianJitter;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h, Eigen::EigenvaluesOnly);
    HessianResult r;
    if (eig.info() != Eigen::Success) {
        r.reliable = false;
        r.ln_det = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    const auto& ev = eig.eigenvalues();
    r.min_eigenvalue = ev.minCoeff();
    if (!(r.min_eigenvalue > 0) || !ev.allFinite()) {
        r.reliable = false;
        r.ln_det = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.ln_det = ev.array().log().sum();
    return r;
}

// Sample size used in the evidence; infinity selects the limiting comparator.
struct SampleSize {
    double n = std::numeric_limits<double>::infinity();

    static SampleSize infinite() { return {}; }
    static SampleSize finite(double value) {
        if (!(value > 0) || !std::isfinite(value)) throw std::invalid_argument("sample size must be a positive number");
        return {value};
    }
    bool is_infinite() const noexcept { return std::isinf(n); }

    // Short label: 1k, 10k, 1M, 1G, inf.
    std::string label() const {
        if (is_infinite()) return "inf";
        struct Unit { double scale; const char* suffix; };
        for (Unit u : {Unit{1e9, "G"}, Unit{1e6, "M"}, Unit{1e3, "k"}}) {
            const double v = n / u.scale;
            if (v >= 1 && std::abs(v - std::round(v)) < 1e-9) return std::to_string(static_cast<long long>(std::round(v))) + u.suffix;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", n);
        return buf;
    }
};

// Accepts "inf", plain numbers ("1e6", "20000") and k/M/G suffixes ("10k").
inline SampleSize parse_sample_size(const std::string& text) {
    if (text == "inf" || text == "infinity" || text == "∞") return SampleSize::infinite();
    if (text.empty()) throw input_error("empty sample size");
    double scale = 1;
    std::string body = text;
    switch (body.back()) {
    case 'k': case 'K': scale = 1e3; body.pop_back(); break;
    case 'M': scale = 1e6; body.pop_back(); break;
    case 'G': scale = 1e9; body.pop_back(); break;
    default: break;
    }
    char* end = nullptr;
    const double v = std::strtod(body.c_str(), &end);
    if (body.empty() || *end != '\0' || !(v > 0) || !std::isfinite(v)) throw input_error("bad sample size '" + text + "'");
    return SampleSize::finite(v * scale);
}

inline std::vector<SampleSize> default_n_grid() {
    return {SampleSize::finite(1e3), SampleSize::finite(1e4), SampleSize::finite(1e5),
            SampleSize::finite(1e6), SampleSize::finite(1e9), SampleSize::infinite()};
}

// Tolerance-independent ingredients of the evidence.
struct EvidenceTerms {
    ModelStructure structure;
    double gkl = 0;
    double lambda = 1;
    std::size_t aux_points = 0;
    std::size_t d_prime = 0;
    double ln_vol_model = 0;
    double ln_vol_aux = 0;
    double ln_det_model = 0;
    double ln_det_aux = 0;
    double min_eigenvalue = 0;
    bool reliable = true;
    bool zero_overlap = false;
};

inline EvidenceTerms evidence_terms(const EmpiricalDistribution& data, const MixtureModel& model) {
    EvidenceTerms t;
    t.structure = model.structure();
    const AugmentedModel aug = augment(data, model);
    t.lambda = aug.lambda;
    t.zero_overlap = aug.zero_overlap();
    t.aux_points = aug.aux_points();
    t.d_prime = augmented_dims(t.structure, t.aux_points);
    t.ln_vol_model = ln_model_volume(t.structure);
    t.ln_vol_aux = ln_aux_volume(t.aux_points);
    t.ln_det_aux = aux_hessian_logdet(aug, data);
    if (data.max_length() >= t.structure.min_valency()) {
        t.gkl = gkl(data, mixture_pmf(model, data.max_length()));
        const HessianResult h = hessian_logdet(data, model);
        t.ln_det_model = h.ln_det;
        t.min_eigenvalue = h.min_eigenvalue;
        t.reliable = h.reliable;
    } else {
        t.gkl = 0;
        t.reliable = false;
        t.ln_det_model = std::numeric_limits<double>::quiet_NaN();
    }
    return t;
}

struct EvidenceScore {
    EvidenceTerms terms;
    double delta = 0;
    double fit_term = 0; // gKL_delta
    bool tolerable = false;

    std::string id() const { return terms.structure.id(); }
    std::size_t d_prime() const noexcept { return terms.d_prime; }
    double ln_vol() const noexcept { return terms.ln_vol_model + terms.ln_vol_aux; }
    double ln_det() const noexcept { return terms.ln_det_model + terms.ln_det_aux; }

    // Volume-and-Hessian term that separates tolerable models of equal size.
    double shape_term() const noexcept { return ln_vol() + 0.5 * ln_det(); }

    double total(SampleSize size) const {
        if (size.is_infinite()) throw std::invalid_argument("total(n) needs a finite n; use the limiting comparator");
        const double n = size.n;
        return fit_term + ln_vol() / n + ln_det() / (2 * n) +
               static_cast<double>(d_prime()) / (2 * n) * std::log(n / (2 * std::numbers::pi));
    }
};

inline EvidenceScore score(const EvidenceTerms& terms, Tolerance tol) {
    EvidenceScore s;
    s.terms = terms;
    s.delta = tol.delta;
    s.fit_term = gkl_delta(terms.gkl, tol);
    s.tolerable = s.fit_term == 0.0;
    return s;
}

inline EvidenceScore score(const EmpiricalDistribution& data, const FitResult& fitted, Tolerance tol) {
    return score(evidence_terms(data, fitted.model), tol);
}

// Strict "a ranks above b". Models with an unreliable Hessian rank below every
// reliable model; ties end at the model id.
inline bool ranks_above(const EvidenceScore& a, const EvidenceScore& b, SampleSize size) {
    if (a.terms.reliable != b.terms.reliable) return a.terms.reliable;
    if (size.is_infinite()) {
        if (a.tolerable != b.tolerable) return a.tolerable;
        if (!a.tolerable) {
            if (a.terms.gkl != b.terms.gkl) return a.terms.gkl < b.terms.gkl;
        } else {
            if (a.d_prime() != b.d_prime()) return a.d_prime() < b.d_prime();
            if (a.terms.reliable && a.shape_term() != b.shape_term()) return a.shape_term() < b.shape_term();
        }
    } else if (a.terms.reliable) {
        const double ta = a.total(size), tb = b.total(size);
        if (ta != tb) return ta < tb;
    } else if (a.terms.gkl != b.terms.gkl) {
        return a.terms.gkl < b.terms.gkl;
    }
    return a.id() < b.id();
}

// Indices of `scores`, best first.
inline std::vector<std::size_t> rank(std::span<const EvidenceScore> scores, SampleSize size) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return ranks_above(scores[a], scores[b], size); });
    return idx;
}

struct ColumnWinner {
    SampleSize size;
    std::string with_tolerance;
    bool with_tolerance_tolerable = false;
    std::string without_tolerance;
    bool without_tolerance_tolerable = false;
};

struct ComparisonReport {
    double delta = 0;
    std::vector<SampleSize> n_grid;
    std::vector<EvidenceScore> with_tolerance;    // ordered by model id
    std::vector<EvidenceScore> without_tolerance; // same order, delta = 0
    std::vector<ColumnWinner> winners;
    std::vector<std::string> failed; // templates without a fit
};

inline std::vector<EvidenceTerms> evidence_terms_all(const EmpiricalDistribution& data,
                                                     std::span<const FitAttempt> fits) {
    std::vector<EvidenceTerms> out;
    for (const auto& f : fits)
        if (f.result) out.push_back(evidence_terms(data, f.result->model));
    std::sort(out.begin(), out.end(),
              [](const EvidenceTerms& a, const EvidenceTerms& b) { return a.structure.id() < b.structure.id(); });
    return out;
}

// Ranks precomputed terms; `exclude` drops model ids from the competition.
inline ComparisonReport compare_terms(std::span<const EvidenceTerms> terms, Tolerance tol,
                                      std::vector<SampleSize> n_grid = default_n_grid(),
                                      const std::vector<std::string>& exclude = {}) {
    ComparisonReport r;
    r.delta = tol.delta;
    r.n_grid = n_grid;
    for (const auto& t : terms) {
        if (std::find(exclude.begin(), exclude.end(), t.structure.id()) != exclude.end()) continue;
        r.with_tolerance.push_back(score(t, tol));
        r.without_tolerance.push_back(score(t, Tolerance::none()));
    }
    if (r.with_tolerance.empty()) return r;
    for (const SampleSize& n : n_grid) {
        ColumnWinner w;
        w.size = n;
        const auto& a = r.with_tolerance[rank(r.with_tolerance, n).front()];
        const auto& b = r.without_tolerance[rank(r.without_tolerance, n).front()];
        w.with_tolerance = a.id();
        w.with_tolerance_tolerable = a.tolerable;
        w.without_tolerance = b.id();
        w.without_tolerance_tolerable = b.tolerable;
        r.winners.push_back(w);
    }
    return r;
}

inline ComparisonReport compare(const EmpiricalDistribution& data, std::span<const FitAttempt> fits, Tolerance tol,
                                std::vector<SampleSize> n_grid = default_n_grid(),
                                const std::vector<std::string>& exclude = {}) {
    const auto terms = evidence_terms_all(data, fits);
    ComparisonReport r = compare_terms(terms, tol, std::move(n_grid), exclude);
    for (const auto& f : fits)
        if (!f.result) r.failed.push_back(f.structure.id());
    return r;
}

} // namespace slen
