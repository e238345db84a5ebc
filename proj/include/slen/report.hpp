#pragma once

// TSV writers for the CLI reports. Every table has a header row; comment
// lines start with '#'.

#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "slen/divergence.hpp"
#include "slen/evidence.hpp"
#include "slen/fit.hpp"
#include "slen/histogram.hpp"
#include "slen/mdl.hpp"

namespace slen::report {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void summary_tsv(std::ostream& out, const LengthHistogram& h, const SkipTally& skipped) {
    const SummaryStats s = summary(h);
    out << "size\tmean\tp999\tmax\tlow_mass\thigh_mass\n";
    out << s.size << '\t' << num(s.mean) << '\t' << s.p999 << '\t' << s.max << '\t' << num(s.low_bin_mass) << '\t'
        << num(s.high_bin_mass) << '\n';
    out << "# mean_after_cutoff\t" << num(s.mean) << '\n';
    out << "# mean_before_cutoff\t" << num(mean_before_cutoff(h, skipped)) << '\n';
    out << "# cutoff\t" << h.cutoff() << '\n';
    out << "# skipped_too_long\t" << skipped.too_long << '\n';
    out << "# skipped_empty\t" << skipped.empty << '\n';
    out << "# deciles";
    for (Length d : deciles(h)) out << '\t' << d;
    out << '\n';
    try {
        const TailFit t = tail_exponent(h, default_tail_start(h));
        out << "# tail_exponent\t" << num(t.exponent) << "\tr2\t" << num(t.r_squared) << "\tfrom\t" << t.tail_start
            << "\tpoints\t" << t.points << '\n';
    } catch (const input_error&) {
        out << "# tail_exponent\tNA\n";
    }
}

inline const char* split_name(SplitKind k) { return k == SplitKind::random ? "random" : "first_second"; }

inline void noise_tsv(std::ostream& out, const NoiseEstimate& e) {
    out << "delta\tsplit\tseed\tfirst_size\tsecond_size\tzero_overlap\n";
    out << num(e.delta) << '\t' << split_name(e.split) << '\t' << e.seed << '\t' << e.first_size << '\t'
        << e.second_size << '\t' << (e.zero_overlap ? 1 : 0) << '\n';
}

inline void objectives_tsv(std::ostream& out, std::span<const FitAttempt> fits) {
    out << "model_id\tobjective\titers\tconverged\tused_fallback\tgrad_norm\treduced_grad_norm\terror\n";
    for (const auto& f : fits) {
        out << f.structure.id() << '\t';
        if (f.result) {
            const auto& r = *f.result;
            out << num(r.objective) << '\t' << r.iters << '\t' << r.converged << '\t' << r.used_fallback << '\t'
                << num(r.grad_norm) << '\t' << num(r.reduced_grad_norm) << "\t\n";
        } else {
            out << "NA\tNA\tNA\tNA\tNA\tNA\t" << f.error << '\n';
        }
    }
}

inline std::string total_cell(const EvidenceScore& s, SampleSize n) {
    // at n = inf the comparator is lexicographic; the fit term is the score
    return num(n.is_infinite() ? s.fit_term : s.total(n));
}

inline void comparison_tsv(std::ostream& out, const ComparisonReport& r, bool with_tolerance = true) {
    const auto& scores = with_tolerance ? r.with_tolerance : r.without_tolerance;
    out << "model_id\td_prime\tgkl\ttolerable\tln_vol\tln_det_model\tln_det_aux\treliable";
    for (const auto& n : r.n_grid) out << "\ttotal@" << n.label();
    out << '\n';
    for (const auto& s : scores) {
        out << s.id() << '\t' << s.d_prime() << '\t' << num(s.terms.gkl) << '\t' << s.tolerable << '\t'
            << num(s.ln_vol()) << '\t' << num(s.terms.ln_det_model) << '\t' << num(s.terms.ln_det_aux) << '\t'
            << s.terms.reliable;
        for (const auto& n : r.n_grid) out << '\t' << total_cell(s, n);
        out << '\n';
    }
}

// One line per n; a trailing '*' marks a non-tolerable winner.
inline void winners_tsv(std::ostream& out, const ComparisonReport& r) {
    out << "n\twith_tolerance\twithout_tolerance\n";
    for (const auto& w : r.winners)
        out << w.size.label() << '\t' << w.with_tolerance << (w.with_tolerance_tolerable ? "" : "*") << '\t'
            << w.without_tolerance << (w.without_tolerance_tolerable ? "" : "*") << '\n';
}

inline void mdl_tsv(std::ostream& out, const MdlReport& r) {
    out << "model_id\tmq\tnq\ttb\tpct_size\tgkl_quantized\n";
    const double naive = r.naive ? static_cast<double>(r.naive->total_bits) : 0.0;
    const std::string nq = r.naive ? std::to_string(r.naive->bits_per_param) : "NA";
    for (const auto& row : r.rows) {
        out << row.id << '\t';
        if (!row.quantized) {
            out << "NA\t" << nq << "\tNA\tNA\tNA\n";
            continue;
        }
        const auto& q = *row.quantized;
        out << q.bits_per_param << '\t' << nq << '\t' << q.total_bits << '\t'
            << (naive > 0 ? num(100.0 * static_cast<double>(q.total_bits) / naive) : "NA") << '\t' << num(q.gkl)
            << '\n';
    }
    out << "# naive_bits\t" << (r.naive ? std::to_string(r.naive->total_bits) : "NA") << '\n';
    if (r.naive) out << "# naive_grid_low_log2\t" << r.naive->grid_low_log2 << '\n';
    out << "# winner\t" << (r.winner ? *r.winner : "none") << '\n';
}

} // namespace slen::report
