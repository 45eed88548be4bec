#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "heaven/corpus.hpp"
#include "heaven/scoring.hpp"
#include "heaven/types.hpp"

namespace heaven {

enum class VariantKind { doc_pool, doc_prune, query_pool, query_prune };

inline const char* to_string(VariantKind k) {
    switch (k) {
        case VariantKind::doc_pool: return "doc_pool";
        case VariantKind::doc_prune: return "doc_prune";
        case VariantKind::query_pool: return "query_pool";
        case VariantKind::query_prune: return "query_prune";
    }
    return "?";
}

inline VariantKind variant_kind_from_string(const std::string& s) {
    if (s == "doc_pool") return VariantKind::doc_pool;
    if (s == "doc_prune") return VariantKind::doc_prune;
    if (s == "query_pool") return VariantKind::query_pool;
    if (s == "query_prune") return VariantKind::query_prune;
    throw Error(Errc::invalid_argument, "unknown variant kind: " + s);
}

struct PatchGrid {
    std::int32_t rows = 0;
    std::int32_t cols = 0;
};

struct VariantConfig {
    VariantKind kind = VariantKind::doc_pool;
    std::int32_t pool_factor = 1;       // pooling kinds
    double prune_ratio = 0.0;           // pruning kinds
    std::uint64_t seed = 0;             // pruning kinds
    std::optional<PatchGrid> grid;      // 2-D patch pooling

    void validate() const {
        if (pool_factor < 1) throw Error(Errc::invalid_argument, "variant: pool_factor < 1");
        if (!(prune_ratio >= 0.0 && prune_ratio < 1.0))
            throw Error(Errc::invalid_argument, "variant: prune_ratio outside [0,1)");
    }
};

/// Mean-pools consecutive non-overlapping row blocks (1-D), or f x f spatial
/// blocks when a patch grid is given (factor must then be a perfect square).
/// The last block in each direction may be short.
inline EmbeddingMatrix pool_matrix(const EmbeddingMatrix& m, std::int32_t factor,
                                   std::optional<PatchGrid> grid = std::nullopt) {
    if (factor < 1) throw Error(Errc::invalid_argument, "pool_matrix: factor < 1");
    if (factor == 1) return m;
    const std::int64_t d = m.dim;

    if (grid) {
        if (static_cast<std::int64_t>(grid->rows) * grid->cols != m.rows)
            throw Error(Errc::dimension_mismatch, "pool_matrix: grid does not match row count");
        const auto f = static_cast<std::int32_t>(std::lround(std::sqrt(double(factor))));
        if (f * f != factor)
            throw Error(Errc::invalid_argument, "pool_matrix: 2-D factor must be a square");
        const std::int32_t out_r = (grid->rows + f - 1) / f;
        const std::int32_t out_c = (grid->cols + f - 1) / f;
        EmbeddingMatrix out;
        out.rows = static_cast<std::int64_t>(out_r) * out_c;
        out.dim = d;
        out.data.assign(out.rows * d, 0.0f);
        for (std::int32_t br = 0; br < out_r; ++br) {
            for (std::int32_t bc = 0; bc < out_c; ++bc) {
                std::vector<double> acc(d, 0.0);
                std::int64_t count = 0;
                for (std::int32_t r = br * f; r < std::min((br + 1) * f, grid->rows); ++r)
                    for (std::int32_t c = bc * f; c < std::min((bc + 1) * f, grid->cols); ++c) {
                        const auto row = m.row(static_cast<std::int64_t>(r) * grid->cols + c);
                        for (std::int64_t k = 0; k < d; ++k) acc[k] += row[k];
                        ++count;
                    }
                float* dst = out.data.data() + (static_cast<std::int64_t>(br) * out_c + bc) * d;
                for (std::int64_t k = 0; k < d; ++k)
                    dst[k] = static_cast<float>(acc[k] / static_cast<double>(count));
            }
        }
        return out;
    }

    const std::int64_t out_rows = (m.rows + factor - 1) / factor;
    EmbeddingMatrix out;
    out.rows = out_rows;
    out.dim = d;
    out.data.assign(out_rows * d, 0.0f);
    for (std::int64_t b = 0; b < out_rows; ++b) {
        const std::int64_t begin = b * factor;
        const std::int64_t end = std::min(begin + factor, m.rows);
        std::vector<double> acc(d, 0.0);
        for (std::int64_t i = begin; i < end; ++i) {
            const auto row = m.row(i);
            for (std::int64_t k = 0; k < d; ++k) acc[k] += row[k];
        }
        float* dst = out.data.data() + b * d;
        for (std::int64_t k = 0; k < d; ++k)
            dst[k] = static_cast<float>(acc[k] / static_cast<double>(end - begin));
    }
    return out;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Generator v1: mt19937_64 seeded from the item id and the global seed.
inline std::mt19937_64 prune_rng(std::string_view item_id, std::uint64_t global_seed) {
    return std::mt19937_64(fnv1a(item_id) ^ (global_seed * 0x9e3779b97f4a7c15ull));
}

}  // namespace detail

/// Keeps a uniform-random subset of ceil((1-ratio)*n) rows, original order
/// preserved. Same (item_id, seed) always selects the same subset.
inline EmbeddingMatrix prune_matrix(const EmbeddingMatrix& m, double ratio,
                                    std::string_view item_id, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio < 1.0))
        throw Error(Errc::invalid_argument, "prune_matrix: ratio outside [0,1)");
    if (ratio == 0.0) return m;
    const std::int64_t keep = static_cast<std::int64_t>(
        std::ceil((1.0 - ratio) * static_cast<double>(m.rows) - 1e-9));
    if (keep < 1) throw Error(Errc::invalid_argument, "prune_matrix: no rows would remain");

    std::vector<std::int64_t> idx(m.rows);
    for (std::int64_t i = 0; i < m.rows; ++i) idx[i] = i;
    auto rng = detail::prune_rng(item_id, seed);
    // Partial Fisher-Yates: the first `keep` slots are a uniform subset.
    for (std::int64_t i = 0; i < keep; ++i) {
        std::uniform_int_distribution<std::int64_t> dist(i, m.rows - 1);
        std::swap(idx[i], idx[dist(rng)]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());

    EmbeddingMatrix out;
    out.rows = keep;
    out.dim = m.dim;
    out.data.reserve(keep * m.dim);
    for (std::int64_t i : idx) {
        const auto row = m.row(i);
        out.data.insert(out.data.end(), row.begin(), row.end());
    }
    return out;
}

/// Applies a transform to the augmentation-token rows only; content rows
/// pass through unchanged (in their original order, transformed rows after).
template <class Transform>
inline EmbeddingMatrix transform_aug_rows(const EmbeddingMatrix& q,
                                          const std::vector<bool>& aug_mask,
                                          Transform&& transform) {
    if (static_cast<std::int64_t>(aug_mask.size()) != q.rows)
        throw Error(Errc::dimension_mismatch, "aug_mask length != query rows");
    EmbeddingMatrix content, aug;
    content.dim = aug.dim = q.dim;
    for (std::int64_t i = 0; i < q.rows; ++i) {
        auto& dst = aug_mask[i] ? aug : content;
        const auto row = q.row(i);
        dst.data.insert(dst.data.end(), row.begin(), row.end());
        ++dst.rows;
    }
    if (aug.rows == 0) return q;  // nothing to transform
    EmbeddingMatrix transformed = transform(aug);
    content.data.insert(content.data.end(), transformed.data.begin(), transformed.data.end());
    content.rows += transformed.rows;
    if (content.rows == 0) throw Error(Errc::empty_input, "query lost all rows");
    return content;
}

/// Exhaustive multi-vector retrieval over the whole corpus with the variant
/// transform applied, plus the FLOPs it costs. The transform itself is not
/// counted, matching an indexing-time transform.
inline std::pair<std::vector<Scored<PageId>>, FlopsLedger> variant_retrieval(
    const QueryRecord& query, const CorpusIndex& index, const VariantConfig& vcfg) {
    vcfg.validate();
    if (query.token_embeddings.dim != index.dim_multi)
        throw Error(Errc::dimension_mismatch, "variant_retrieval: query dim != index dim_multi");

    EmbeddingMatrix q = query.token_embeddings;
    if (vcfg.kind == VariantKind::query_pool || vcfg.kind == VariantKind::query_prune) {
        std::vector<bool> aug = query.aug_mask
                                    ? *query.aug_mask
                                    : std::vector<bool>(q.rows, true);
        q = transform_aug_rows(q, aug, [&](const EmbeddingMatrix& rows) {
            if (vcfg.kind == VariantKind::query_pool)
                return pool_matrix(rows, vcfg.pool_factor);
            return prune_matrix(rows, vcfg.prune_ratio, query.query_id, vcfg.seed);
        });
    }

    FlopsLedger ledger;
    std::vector<Scored<PageId>> scored;
    scored.reserve(index.page_count());
    for (std::int64_t ord = 0; ord < index.page_count(); ++ord) {
        const PageId pid = index.page_id(ord);
        const EmbeddingMatrix* page = &index.page_multi[ord];
        EmbeddingMatrix transformed;
        if (vcfg.kind == VariantKind::doc_pool) {
            transformed = pool_matrix(*page, vcfg.pool_factor, vcfg.grid);
            page = &transformed;
        } else if (vcfg.kind == VariantKind::doc_prune) {
            const std::string page_key =
                index.documents[pid.doc_index].doc_id + "#" + std::to_string(pid.page_index);
            transformed = prune_matrix(*page, vcfg.prune_ratio, page_key, vcfg.seed);
            page = &transformed;
        }
        scored.push_back({pid, maxsim_score(q, *page, &ledger.variant)});
    }
    return {sorted_by_rank(std::move(scored)), ledger};
}

}  // namespace heaven
