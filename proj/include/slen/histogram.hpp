#pragma once

// Sentence-length histograms: ingestion, empirical distributions, summary
// statistics and a few diagnostics (deciles, half splits, tail exponent).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slen/error.hpp"

namespace slen {

using Length = std::int64_t;
using Count = std::uint64_t;

inline constexpr Length kDefaultCutoff = 1000;

class LengthHistogram {
public:
    explicit LengthHistogram(Length cutoff = kDefaultCutoff) : cutoff_(cutoff) {
        if (cutoff < 1) throw std::invalid_argument("histogram cutoff must be >= 1");
    }

    void add(Length length, Count count = 1) {
        if (length < 1 || length > cutoff_)
            throw std::invalid_argument("length " + std::to_string(length) +
                                        " outside [1, cutoff]");
        if (count == 0) return;
        counts_[length] += count;
        size_ += count;
    }

    Length cutoff() const noexcept { return cutoff_; }
    Count size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }
    const std::map<Length, Count>& counts() const noexcept { return counts_; }
    std::size_t support_size() const noexcept { return counts_.size(); }

    Count count(Length length) const {
        auto it = counts_.find(length);
        return it == counts_.end() ? 0 : it->second;
    }

    Length min_length() const { require_nonempty(); return counts_.begin()->first; }
    Length max_length() const { require_nonempty(); return counts_.rbegin()->first; }

    void require_nonempty() const {
        if (empty()) throw input_error("empty histogram");
    }

    friend bool operator==(const LengthHistogram&, const LengthHistogram&) = default;

private:
    Length cutoff_;
    Count size_ = 0;
    std::map<Length, Count> counts_;
};

// Records dropped during ingestion. `too_long_sum` lets callers report the
// mean before the cutoff was applied.
struct SkipTally {
    Count too_long = 0;
    Count empty = 0;
    long double too_long_sum = 0;
};

// Ordered record of admitted lengths; needed wherever order matters (half splits).
struct LengthStream {
    std::vector<Length> lengths;
    SkipTally skipped;
};

struct Ingested {
    LengthHistogram histogram;
    SkipTally skipped;
};

inline LengthHistogram histogram_of(std::span<const Length> lengths,
                                    Length cutoff = kDefaultCutoff) {
    LengthHistogram h(cutoff);
    for (Length x : lengths) h.add(x);
    return h;
}

namespace detail {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline Length count_tokens(const std::string& line) {
    Length tokens = 0;
    bool in_token = false;
    for (char c : line) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++tokens;
        }
    }
    return tokens;
}

inline void check_stream(std::istream& in, std::uint64_t line_no) {
    if (in.bad())
        throw input_error("read failure at line " + std::to_string(line_no));
}

inline bool parse_positive(const std::string& field, std::int64_t& out) {
    if (field.empty()) return false;
    std::size_t pos = 0;
    try {
        long long v = std::stoll(field, &pos);
        if (pos != field.size()) return false;
        out = v;
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

} // namespace detail

// One sentence per line; the length is the number of whitespace-separated tokens.
inline LengthStream read_text_lengths(std::istream& in, Length cutoff = kDefaultCutoff) {
    if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
    LengthStream out;
    std::string line;
    std::uint64_t line_no = 0;
    while (true) {
        ++line_no;
        if (!std::getline(in, line)) {
            detail::check_stream(in, line_no);
            break;
        }
        Length n = detail::count_tokens(line);
        if (n == 0) {
            ++out.skipped.empty;
        } else if (n > cutoff) {
            ++out.skipped.too_long;
            out.skipped.too_long_sum += static_cast<long double>(n);
        } else {
            out.lengths.push_back(n);
        }
    }
    return out;
}

inline Ingested ingest_text(std::istream& in, Length cutoff = kDefaultCutoff) {
    LengthStream s = read_text_lengths(in, cutoff);
    return {histogram_of(s.lengths, cutoff), s.skipped};
}

// "length<TAB>count" rows. Duplicate lengths are merged.
inline Ingested ingest_tsv(std::istream& in, Length cutoff = kDefaultCutoff) {
    if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
    Ingested out{LengthHistogram(cutoff), {}};
    std::string line;
    std::uint64_t row = 0;
    while (true) {
        ++row;
        if (!std::getline(in, line)) {
            detail::check_stream(in, row);
            break;
        }
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw input_error("row " + std::to_string(row) + ": expected length<TAB>count");
        std::int64_t length = 0, count = 0;
        if (!detail::parse_positive(line.substr(0, tab), length) ||
            !detail::parse_positive(line.substr(tab + 1), count))
            throw input_error("row " + std::to_string(row) + ": non-integer field");
        if (length <= 0)
            throw input_error("row " + std::to_string(row) + ": length must be positive");
        if (count <= 0)
            throw input_error("row " + std::to_string(row) + ": count must be positive");
        if (length > cutoff) {
            out.skipped.too_long += static_cast<Count>(count);
            out.skipped.too_long_sum +=
                static_cast<long double>(length) * static_cast<long double>(count);
            continue;
        }
        out.histogram.add(length, static_cast<Count>(count));
    }
    return out;
}

// Sorted by length; probabilities are n_x / n.
struct EmpiricalDistribution {
    std::vector<Length> lengths;
    std::vector<double> probs;
    Count size = 0;

    std::size_t support_size() const noexcept { return lengths.size(); }
    Length max_length() const { return lengths.back(); }
    Length min_length() const { return lengths.front(); }
    double prob(Length x) const {
        auto it = std::lower_bound(lengths.begin(), lengths.end(), x);
        if (it == lengths.end() || *it != x) return 0.0;
        return probs[static_cast<std::size_t>(it - lengths.begin())];
    }
};

inline EmpiricalDistribution empirical(const LengthHistogram& h) {
    h.require_nonempty();
    EmpiricalDistribution d;
    d.size = h.size();
    d.lengths.reserve(h.support_size());
    d.probs.reserve(h.support_size());
    const double n = static_cast<double>(h.size());
    for (const auto& [x, c] : h.counts()) {
        d.lengths.push_back(x);
        d.probs.push_back(static_cast<double>(c) / n);
    }
    return d;
}

struct SummaryStats {
    Count size = 0;
    double mean = 0;
    Length p999 = 0;
    Length max = 0;
    double low_bin_mass = 0;  // length <= 4
    double high_bin_mass = 0; // length >= 71
};

inline constexpr Length kLowBinMax = 4;
inline constexpr Length kHighBinMin = 71;

inline SummaryStats summary(const LengthHistogram& h) {
    h.require_nonempty();
    SummaryStats s;
    s.size = h.size();
    s.max = h.max_length();
    long double sum = 0;
    Count low = 0, high = 0, cumulative = 0;
    bool have_p999 = false;
    for (const auto& [x, c] : h.counts()) {
        sum += static_cast<long double>(x) * static_cast<long double>(c);
        if (x <= kLowBinMax) low += c;
        if (x >= kHighBinMin) high += c;
        cumulative += c;
        // cumulative / n >= 0.999 in exact integer arithmetic
        if (!have_p999 && 1000 * static_cast<unsigned __int128>(cumulative) >=
                              999 * static_cast<unsigned __int128>(s.size)) {
            s.p999 = x;
            have_p999 = true;
        }
    }
    const double n = static_cast<double>(s.size);
    s.mean = static_cast<double>(sum / static_cast<long double>(s.size));
    s.low_bin_mass = static_cast<double>(low) / n;
    s.high_bin_mass = static_cast<double>(high) / n;
    return s;
}

// Mean including the lines dropped by the cutoff (empty lines never count).
inline double mean_before_cutoff(const LengthHistogram& h, const SkipTally& skipped) {
    long double sum = skipped.too_long_sum;
    for (const auto& [x, c] : h.counts())
        sum += static_cast<long double>(x) * static_cast<long double>(c);
    const Count n = h.size() + skipped.too_long;
    if (n == 0) throw input_error("empty histogram");
    return static_cast<double>(sum / static_cast<long double>(n));
}

// Upper boundary of each decile bin: the smallest length whose cumulative
// count reaches j*n/10.
inline std::array<Length, 10> deciles(const LengthHistogram& h) {
    h.require_nonempty();
    std::array<Length, 10> out{};
    const auto n = static_cast<unsigned __int128>(h.size());
    unsigned __int128 cumulative = 0;
    std::size_t j = 0;
    for (const auto& [x, c] : h.counts()) {
        cumulative += c;
        while (j < 10 && 10 * cumulative >= (j + 1) * n) out[j++] = x;
    }
    return out;
}

// Smallest length whose cumulative mass reaches `q` (0 < q <= 1).
inline Length quantile(const LengthHistogram& h, double q) {
    h.require_nonempty();
    const double target = q * static_cast<double>(h.size());
    Count cumulative = 0;
    for (const auto& [x, c] : h.counts()) {
        cumulative += c;
        if (static_cast<double>(cumulative) >= target) return x;
    }
    return h.max_length();
}

enum class SplitKind { first_second, random };

inline std::pair<std::vector<Length>, std::vector<Length>>
split_stream(std::span<const Length> lengths, SplitKind kind, std::uint64_t seed = 0) {
    if (lengths.size() < 2) throw input_error("half split needs at least 2 records");
    std::vector<Length> all(lengths.begin(), lengths.end());
    if (kind == SplitKind::random) {
        std::mt19937_64 rng(seed);
        std::shuffle(all.begin(), all.end(), rng);
    }
    const std::size_t first = (all.size() + 1) / 2;
    std::vector<Length> a(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(first));
    std::vector<Length> b(all.begin() + static_cast<std::ptrdiff_t>(first), all.end());
    return {std::move(a), std::move(b)};
}

// First ceil(N/2) records go to the first half.
inline std::pair<LengthHistogram, LengthHistogram>
split_halves(std::span<const Length> lengths, SplitKind kind = SplitKind::first_second,
             std::uint64_t seed = 0, Length cutoff = kDefaultCutoff) {
    auto [a, b] = split_stream(lengths, kind, seed);
    return {histogram_of(a, cutoff), histogram_of(b, cutoff)};
}

// Expands a histogram into an ascending record stream.
inline std::vector<Length> expand(const LengthHistogram& h) {
    std::vector<Length> out;
    out.reserve(static_cast<std::size_t>(h.size()));
    for (const auto& [x, c] : h.counts()) out.insert(out.end(), c, x);
    return out;
}

struct TailFit {
    double exponent = 0;  // C in count ~ x^{-C}
    double r_squared = 0; // of the ln-ln regression
    std::size_t points = 0;
    Length tail_start = 0;
};

inline Length default_tail_start(const LengthHistogram& h) { return quantile(h, 0.99); }

// Unweighted least squares of ln(count) on ln(length) over lengths >= tail_start.
inline TailFit tail_exponent(const LengthHistogram& h, Length tail_start) {
    std::vector<double> xs, ys;
    for (auto it = h.counts().lower_bound(tail_start); it != h.counts().end(); ++it) {
        xs.push_back(std::log(static_cast<double>(it->first)));
        ys.push_back(std::log(static_cast<double>(it->second)));
    }
    if (xs.size() < 5)
        throw input_error("tail exponent needs at least 5 distinct lengths >= " +
                          std::to_string(tail_start));
    const double m = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
    mx /= m;
    my /= m;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    TailFit fit;
    fit.points = xs.size();
    fit.tail_start = tail_start;
    const double slope = sxy / sxx;
    fit.exponent = -slope;
    fit.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

} // namespace slen
