#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "heaven/types.hpp"

namespace heaven {

// FLOP accounting convention: a d-dim inner product costs 2d (d multiplies +
// d adds), a max over m candidates costs m-1 comparisons, a fusion costs 3.
// All accumulation in double; ledger pointers may be null.

inline double dot_score(const PooledVector& q, const PooledVector& p,
                        std::uint64_t* flops = nullptr) {
    if (q.dim() != p.dim())
        throw Error(Errc::dimension_mismatch, "dot_score: dims differ");
    double acc = 0.0;
    for (std::int64_t i = 0; i < q.dim(); ++i)
        acc += static_cast<double>(q.data[i]) * static_cast<double>(p.data[i]);
    if (flops) *flops += 2 * static_cast<std::uint64_t>(q.dim());
    return acc;
}

namespace detail {

// Shared kernel so the all-true masked path is bit-identical to the
// unmasked one. `mask` may be null (all rows active).
inline double maxsim_kernel(const EmbeddingMatrix& q, const std::vector<bool>* mask,
                            const EmbeddingMatrix& p, std::uint64_t* flops) {
    if (q.dim != p.dim)
        throw Error(Errc::dimension_mismatch, "maxsim: dims differ");
    if (q.rows < 1 || p.rows < 1)
        throw Error(Errc::empty_input, "maxsim: empty matrix");
    const std::int64_t d = q.dim;
    double total = 0.0;
    std::uint64_t active = 0;
    for (std::int64_t i = 0; i < q.rows; ++i) {
        if (mask && !(*mask)[static_cast<std::size_t>(i)]) continue;
        ++active;
        const float* qr = q.data.data() + i * d;
        double best = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < p.rows; ++j) {
            const float* pr = p.data.data() + j * d;
            double acc = 0.0;
            for (std::int64_t k = 0; k < d; ++k)
                acc += static_cast<double>(qr[k]) * static_cast<double>(pr[k]);
            best = std::max(best, acc);
        }
        total += best;
    }
    if (flops)
        *flops += active * static_cast<std::uint64_t>(p.rows) * 2 * static_cast<std::uint64_t>(d) +
                  active * static_cast<std::uint64_t>(p.rows - 1);
    return total;
}

}  // namespace detail

/// Late-interaction score: sum over query rows of the max inner product
/// against page rows.
inline double maxsim_score(const EmbeddingMatrix& q, const EmbeddingMatrix& p,
                           std::uint64_t* flops = nullptr) {
    return detail::maxsim_kernel(q, nullptr, p, flops);
}

inline double masked_maxsim_score(const EmbeddingMatrix& q, const std::vector<bool>& mask,
                                  const EmbeddingMatrix& p, std::uint64_t* flops = nullptr) {
    if (static_cast<std::int64_t>(mask.size()) != q.rows)
        throw Error(Errc::dimension_mismatch, "masked_maxsim: mask length != query rows");
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
        throw Error(Errc::degenerate_mask, "masked_maxsim: all-false mask");
    return detail::maxsim_kernel(q, &mask, p, flops);
}

/// Convex combination w*a + (1-w)*b.
inline double fuse(double a, double b, double w, std::uint64_t* flops = nullptr) {
    if (!(w >= 0.0 && w <= 1.0))
        throw Error(Errc::invalid_argument, "fuse: weight outside [0,1]");
    if (flops) *flops += 3;
    return w * a + (1.0 - w) * b;
}

template <class Id>
inline std::vector<Scored<Id>> sorted_by_rank(std::vector<Scored<Id>> items) {
    std::sort(items.begin(), items.end(), ranks_before<Id>);
    return items;
}

template <class Id>
inline std::vector<Scored<Id>> top_k(const std::vector<Scored<Id>>& items, std::int64_t k) {
    if (items.empty()) throw Error(Errc::empty_input, "top_k: empty input");
    if (k < 1) throw Error(Errc::invalid_argument, "top_k: k < 1");
    auto sorted = sorted_by_rank(items);
    if (k < static_cast<std::int64_t>(sorted.size()))
        sorted.resize(static_cast<std::size_t>(k));
    return sorted;
}

/// ceil(p * n) with a guard against ties like 0.1 * 10 landing just above 1.0.
inline std::int64_t ceil_fraction(std::int64_t n, double p) {
    auto m = static_cast<std::int64_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
    return std::clamp<std::int64_t>(m, 1, n);
}

/// Keeps the ceil(p * n) highest-ranked items.
template <class Id>
inline std::vector<Scored<Id>> top_fraction(const std::vector<Scored<Id>>& items, double p) {
    if (items.empty()) throw Error(Errc::empty_input, "top_fraction: empty input");
    if (!(p > 0.0 && p <= 1.0))
        throw Error(Errc::invalid_argument, "top_fraction: p outside (0,1]");
    return top_k(items, ceil_fraction(static_cast<std::int64_t>(items.size()), p));
}

}  // namespace heaven
