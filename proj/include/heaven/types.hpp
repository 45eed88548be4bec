#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace heaven {

enum class Errc {
    io,
    bad_magic,
    bad_version,
    bad_dtype,
    truncated,
    non_finite,
    dimension_mismatch,
    invalid_argument,
    missing_file,
    duplicate_page,
    unknown_doc,
    bad_manifest,
    empty_input,
    degenerate_mask,
    out_of_range,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

/// Page P_{k,i}: i-th page of the k-th document, both 0-based.
struct PageId {
    std::int32_t doc_index = 0;
    std::int32_t page_index = 0;
    auto operator<=>(const PageId&) const = default;
};

/// j-th VS-page of the k-th document.
struct VSPageId {
    std::int32_t doc_index = 0;
    std::int32_t group_index = 0;
    auto operator<=>(const VSPageId&) const = default;
};

struct DocumentMeta {
    std::string doc_id;
    std::int32_t page_count = 0;
    // Global ordinal of this document's first page; pages are dense.
    std::int64_t page_offset = 0;
};

/// Row-major n x d matrix of multi-vector embeddings.
struct EmbeddingMatrix {
    std::int64_t rows = 0;
    std::int64_t dim = 0;
    std::vector<float> data;

    std::span<const float> row(std::int64_t i) const {
        return {data.data() + i * dim, static_cast<std::size_t>(dim)};
    }

    void validate() const {
        if (rows < 1 || dim < 1)
            throw Error(Errc::invalid_argument, "embedding matrix must have rows >= 1 and dim >= 1");
        if (static_cast<std::int64_t>(data.size()) != rows * dim)
            throw Error(Errc::invalid_argument, "embedding matrix data length != rows * dim");
        for (float v : data)
            if (!std::isfinite(v))
                throw Error(Errc::non_finite, "embedding matrix contains a non-finite value");
    }
};

struct PooledVector {
    std::vector<float> data;

    std::int64_t dim() const { return static_cast<std::int64_t>(data.size()); }

    void validate() const {
        if (data.empty())
            throw Error(Errc::invalid_argument, "pooled vector must have dim >= 1");
        for (float v : data)
            if (!std::isfinite(v))
                throw Error(Errc::non_finite, "pooled vector contains a non-finite value");
    }
};

enum class LayoutClass {
    title,
    plain_text,
    abandon,
    figure,
    figure_caption,
    table,
    table_caption,
    isolated_formula,
    formula_caption,
};

const char* to_string(LayoutClass c);
LayoutClass layout_class_from_string(const std::string& s);

inline const char* to_string(LayoutClass c) {
    switch (c) {
        case LayoutClass::title: return "title";
        case LayoutClass::plain_text: return "plain_text";
        case LayoutClass::abandon: return "abandon";
        case LayoutClass::figure: return "figure";
        case LayoutClass::figure_caption: return "figure_caption";
        case LayoutClass::table: return "table";
        case LayoutClass::table_caption: return "table_caption";
        case LayoutClass::isolated_formula: return "isolated_formula";
        case LayoutClass::formula_caption: return "formula_caption";
    }
    return "?";
}

inline LayoutClass layout_class_from_string(const std::string& s) {
    static const std::pair<const char*, LayoutClass> table[] = {
        {"title", LayoutClass::title},
        {"plain_text", LayoutClass::plain_text},
        {"abandon", LayoutClass::abandon},
        {"figure", LayoutClass::figure},
        {"figure_caption", LayoutClass::figure_caption},
        {"table", LayoutClass::table},
        {"table_caption", LayoutClass::table_caption},
        {"isolated_formula", LayoutClass::isolated_formula},
        {"formula_caption", LayoutClass::formula_caption},
    };
    for (const auto& [name, klass] : table)
        if (s == name) return klass;
    throw Error(Errc::bad_manifest, "unknown layout class: " + s);
}

/// Detected layout region on a page, pixel coordinates.
struct LayoutBox {
    PageId page;
    LayoutClass klass = LayoutClass::title;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double confidence = 1.0;

    void validate() const {
        if (!(x0 < x1) || !(y0 < y1))
            throw Error(Errc::invalid_argument, "layout bbox must satisfy x0 < x1 and y0 < y1");
        if (confidence < 0.0 || confidence > 1.0)
            throw Error(Errc::invalid_argument, "layout confidence must be in [0,1]");
    }
};

template <class Id>
struct Scored {
    Id id{};
    double score = 0.0;
    bool operator==(const Scored&) const = default;
};

/// Tie-break used everywhere: score descending, then id ascending.
template <class Id>
inline bool ranks_before(const Scored<Id>& a, const Scored<Id>& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

/// Exact per-phase FLOP counts for one query evaluation.
struct FlopsLedger {
    std::uint64_t stage1_vs = 0;
    std::uint64_t stage1_refine = 0;
    std::uint64_t stage2_filtered = 0;
    std::uint64_t stage2_refine = 0;
    std::uint64_t variant = 0;

    std::uint64_t total() const {
        return stage1_vs + stage1_refine + stage2_filtered + stage2_refine + variant;
    }

    FlopsLedger& operator+=(const FlopsLedger& o) {
        stage1_vs += o.stage1_vs;
        stage1_refine += o.stage1_refine;
        stage2_filtered += o.stage2_filtered;
        stage2_refine += o.stage2_refine;
        variant += o.variant;
        return *this;
    }

    bool operator==(const FlopsLedger&) const = default;
};

}  // namespace heaven
