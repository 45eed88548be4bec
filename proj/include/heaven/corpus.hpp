#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "heaven/embedding_io.hpp"
#include "heaven/key_tokens.hpp"
#include "heaven/types.hpp"
#include "heaven/vspage.hpp"

namespace heaven {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Page <-> VS-page association. Ordinal-indexed; `inverse` is total on the
/// corpus and consistent with `forward`.
struct GammaMap {
    std::vector<VSPageId> vs_ids;              // vs ordinal -> id
    std::vector<std::vector<PageId>> forward;  // vs ordinal -> member pages
    std::vector<std::int64_t> inverse;         // page ordinal -> vs ordinal
};

class CorpusIndex {
public:
    std::vector<DocumentMeta> documents;
    std::vector<PooledVector> page_pooled;    // by global page ordinal
    std::vector<EmbeddingMatrix> page_multi;  // by global page ordinal
    std::vector<PooledVector> vs_pooled;      // by vs ordinal
    GammaMap gamma;
    std::int64_t dim_single = 0;
    std::int64_t dim_multi = 0;

    std::int64_t page_count() const { return static_cast<std::int64_t>(page_pooled.size()); }
    std::int64_t vs_count() const { return static_cast<std::int64_t>(vs_pooled.size()); }

    std::int64_t page_ordinal(PageId p) const {
        if (p.doc_index < 0 || p.doc_index >= static_cast<std::int32_t>(documents.size()))
            throw Error(Errc::out_of_range, "page_ordinal: bad doc_index");
        const auto& doc = documents[p.doc_index];
        if (p.page_index < 0 || p.page_index >= doc.page_count)
            throw Error(Errc::out_of_range, "page_ordinal: bad page_index");
        return doc.page_offset + p.page_index;
    }

    PageId page_id(std::int64_t ordinal) const {
        for (std::size_t k = 0; k < documents.size(); ++k) {
            const auto& doc = documents[k];
            if (ordinal < doc.page_offset + doc.page_count)
                return {static_cast<std::int32_t>(k),
                        static_cast<std::int32_t>(ordinal - doc.page_offset)};
        }
        throw Error(Errc::out_of_range, "page_id: ordinal out of range");
    }

    bool contains(PageId p) const {
        return p.doc_index >= 0 && p.doc_index < static_cast<std::int32_t>(documents.size()) &&
               p.page_index >= 0 && p.page_index < documents[p.doc_index].page_count;
    }

    const PooledVector& pooled(PageId p) const { return page_pooled[page_ordinal(p)]; }
    const EmbeddingMatrix& multi(PageId p) const { return page_multi[page_ordinal(p)]; }
    VSPageId vs_of(PageId p) const { return gamma.vs_ids[gamma.inverse[page_ordinal(p)]]; }
    std::int64_t vs_ordinal_of(PageId p) const { return gamma.inverse[page_ordinal(p)]; }

    std::int64_t vs_ordinal(VSPageId v) const {
        auto it = vs_ord_.find((static_cast<std::int64_t>(v.doc_index) << 32) | v.group_index);
        if (it == vs_ord_.end()) throw Error(Errc::out_of_range, "unknown VS-page id");
        return it->second;
    }

    void rebuild_vs_lookup() {
        vs_ord_.clear();
        for (std::size_t v = 0; v < gamma.vs_ids.size(); ++v)
            vs_ord_[(static_cast<std::int64_t>(gamma.vs_ids[v].doc_index) << 32) |
                    gamma.vs_ids[v].group_index] = static_cast<std::int64_t>(v);
    }

private:
    std::unordered_map<std::int64_t, std::int64_t> vs_ord_;
};

/// Assembles and validates an index from in-memory parts. `vs_records` must
/// cover every page exactly once; `vs_pooled` is aligned with `vs_records`.
inline CorpusIndex make_index(std::vector<DocumentMeta> documents,
                              std::vector<PooledVector> page_pooled,
                              std::vector<EmbeddingMatrix> page_multi,
                              const std::vector<VSPageRecord>& vs_records,
                              std::vector<PooledVector> vs_pooled) {
    CorpusIndex idx;
    std::int64_t offset = 0;
    std::set<std::string> seen_ids;
    for (auto& doc : documents) {
        if (doc.page_count < 1)
            throw Error(Errc::bad_manifest, "document with page_count < 1: " + doc.doc_id);
        if (!seen_ids.insert(doc.doc_id).second)
            throw Error(Errc::bad_manifest, "duplicate doc_id: " + doc.doc_id);
        doc.page_offset = offset;
        offset += doc.page_count;
    }
    idx.documents = std::move(documents);

    if (static_cast<std::int64_t>(page_pooled.size()) != offset ||
        static_cast<std::int64_t>(page_multi.size()) != offset)
        throw Error(Errc::bad_manifest, "page embedding count != total page count");
    for (const auto& v : page_pooled) v.validate();
    for (const auto& m : page_multi) m.validate();
    idx.dim_single = page_pooled.front().dim();
    idx.dim_multi = page_multi.front().dim;
    for (const auto& v : page_pooled)
        if (v.dim() != idx.dim_single)
            throw Error(Errc::dimension_mismatch, "pooled embedding dim mismatch across pages");
    for (const auto& m : page_multi)
        if (m.dim != idx.dim_multi)
            throw Error(Errc::dimension_mismatch, "multi-vector dim mismatch across pages");
    idx.page_pooled = std::move(page_pooled);
    idx.page_multi = std::move(page_multi);

    if (vs_records.size() != vs_pooled.size())
        throw Error(Errc::bad_manifest, "vs_pooled count != vs_records count");
    if (vs_records.empty())
        throw Error(Errc::bad_manifest, "index requires at least one VS-page");
    for (const auto& v : vs_pooled) {
        v.validate();
        if (v.dim() != idx.dim_single)
            throw Error(Errc::dimension_mismatch, "VS-page pooled dim != page pooled dim");
    }
    idx.vs_pooled = std::move(vs_pooled);

    idx.gamma.inverse.assign(offset, -1);
    for (const auto& rec : vs_records) {
        if (rec.member_pages.empty())
            throw Error(Errc::bad_manifest, "VS-page with no member pages");
        const std::int64_t ord = static_cast<std::int64_t>(idx.gamma.vs_ids.size());
        idx.gamma.vs_ids.push_back(rec.id);
        idx.gamma.forward.push_back(rec.member_pages);
        for (PageId p : rec.member_pages) {
            const std::int64_t po = idx.page_ordinal(p);
            if (idx.gamma.inverse[po] != -1)
                throw Error(Errc::duplicate_page, "page belongs to two VS-pages");
            idx.gamma.inverse[po] = ord;
        }
    }
    for (std::int64_t po = 0; po < offset; ++po)
        if (idx.gamma.inverse[po] == -1)
            throw Error(Errc::bad_manifest, "page not covered by any VS-page");
    idx.rebuild_vs_lookup();
    return idx;
}

// ---------------------------------------------------------------------------
// Corpus manifest (JSON document)
// ---------------------------------------------------------------------------

struct ManifestPage {
    std::string doc_id;
    std::int32_t page_index = 0;
    std::string pooled_path;
    std::string multi_path;
    std::optional<PageDims> dims;
};

struct VsCropEntry {
    std::int32_t page_index = 0;
    std::int32_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    std::int32_t target_y = 0;
    bool operator==(const VsCropEntry&) const = default;
};

struct VsManifestEntry {
    std::string doc_id;
    std::int32_t group_index = 0;
    std::vector<std::int32_t> member_pages;
    std::vector<VsCropEntry> crops;
    std::int32_t composite_w = 1;
    std::int32_t composite_h = 1;
    std::string pooled_path;  // may be empty
    bool operator==(const VsManifestEntry&) const = default;
};

struct CorpusManifest {
    std::filesystem::path base_dir;
    std::vector<DocumentMeta> documents;
    std::vector<ManifestPage> pages;
    std::vector<VsManifestEntry> vs_pages;

    std::int32_t doc_index_of(const std::string& doc_id) const {
        for (std::size_t k = 0; k < documents.size(); ++k)
            if (documents[k].doc_id == doc_id) return static_cast<std::int32_t>(k);
        throw Error(Errc::unknown_doc, "unknown doc_id: " + doc_id);
    }
};

namespace detail {

inline VsManifestEntry vs_entry_from_json(const json& v) {
    VsManifestEntry e;
    e.doc_id = v.at("doc_id").get<std::string>();
    e.group_index = v.at("group_index").get<std::int32_t>();
    e.member_pages = v.at("member_pages").get<std::vector<std::int32_t>>();
    for (const auto& c : v.at("crops")) {
        VsCropEntry crop;
        crop.page_index = c.at("page_index").get<std::int32_t>();
        const auto& bbox = c.at("bbox");
        if (!bbox.is_array() || bbox.size() != 4)
            throw Error(Errc::bad_manifest, "crop bbox must be [x0,y0,x1,y1]");
        crop.x0 = bbox[0].get<std::int32_t>();
        crop.y0 = bbox[1].get<std::int32_t>();
        crop.x1 = bbox[2].get<std::int32_t>();
        crop.y1 = bbox[3].get<std::int32_t>();
        crop.target_y = c.at("target_y").get<std::int32_t>();
        e.crops.push_back(crop);
    }
    e.composite_w = v.at("composite").at("w").get<std::int32_t>();
    e.composite_h = v.at("composite").at("h").get<std::int32_t>();
    if (v.contains("pooled_path")) e.pooled_path = v.at("pooled_path").get<std::string>();
    return e;
}

inline ordered_json vs_entry_to_json(const VsManifestEntry& e) {
    ordered_json crops = ordered_json::array();
    for (const auto& c : e.crops)
        crops.push_back(ordered_json{{"page_index", c.page_index},
                                     {"bbox", {c.x0, c.y0, c.x1, c.y1}},
                                     {"target_y", c.target_y}});
    ordered_json out{{"doc_id", e.doc_id},
                     {"group_index", e.group_index},
                     {"member_pages", e.member_pages},
                     {"crops", crops},
                     {"composite", {{"w", e.composite_w}, {"h", e.composite_h}}}};
    if (!e.pooled_path.empty()) out["pooled_path"] = e.pooled_path;
    return out;
}

}  // namespace detail

inline CorpusManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_file, "cannot open manifest: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error(Errc::bad_manifest, "manifest parse error: " + std::string(e.what()));
    }

    CorpusManifest m;
    m.base_dir = path.parent_path();
    for (const auto& d : doc.at("documents")) {
        DocumentMeta meta;
        meta.doc_id = d.at("doc_id").get<std::string>();
        meta.page_count = d.at("page_count").get<std::int32_t>();
        m.documents.push_back(std::move(meta));
    }
    for (const auto& p : doc.at("pages")) {
        ManifestPage page;
        page.doc_id = p.at("doc_id").get<std::string>();
        page.page_index = p.at("page_index").get<std::int32_t>();
        page.pooled_path = p.at("pooled_path").get<std::string>();
        page.multi_path = p.at("multi_path").get<std::string>();
        if (p.contains("width_px") && p.contains("height_px"))
            page.dims = PageDims{p.at("width_px").get<std::int32_t>(),
                                 p.at("height_px").get<std::int32_t>()};
        m.pages.push_back(std::move(page));
    }
    if (doc.contains("vs_pages"))
        for (const auto& v : doc.at("vs_pages"))
            m.vs_pages.push_back(detail::vs_entry_from_json(v));
    return m;
}

// ---------------------------------------------------------------------------
// VS-page manifest file (JSONL, one entry per VS-page)
// ---------------------------------------------------------------------------

inline void write_vs_manifest(const std::vector<VsManifestEntry>& entries,
                              const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot open for write: " + path.string());
    for (const auto& e : entries) out << detail::vs_entry_to_json(e).dump() << '\n';
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

inline std::vector<VsManifestEntry> read_vs_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_file, "cannot open: " + path.string());
    std::vector<VsManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            entries.push_back(detail::vs_entry_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(Errc::bad_manifest, "VS manifest parse error: " + std::string(e.what()));
        }
    }
    return entries;
}

// ---------------------------------------------------------------------------
// Index construction from a manifest on disk
// ---------------------------------------------------------------------------

inline CorpusIndex build_index(const std::filesystem::path& manifest_path,
                               const std::vector<VsManifestEntry>* vs_override = nullptr) {
    const CorpusManifest m = load_manifest(manifest_path);

    std::int64_t total = 0;
    for (const auto& d : m.documents) total += d.page_count;
    if (static_cast<std::int64_t>(m.pages.size()) != total)
        throw Error(Errc::bad_manifest, "manifest page entries != sum of page_count");

    std::vector<PooledVector> pooled(total);
    std::vector<EmbeddingMatrix> multi(total);
    std::vector<bool> seen(total, false);

    // Resolve ordinals eagerly; duplicate or out-of-range pages fail here.
    std::vector<std::int64_t> offsets(m.documents.size());
    std::int64_t off = 0;
    for (std::size_t k = 0; k < m.documents.size(); ++k) {
        offsets[k] = off;
        off += m.documents[k].page_count;
    }
    for (const auto& p : m.pages) {
        const std::int32_t k = m.doc_index_of(p.doc_id);
        if (p.page_index < 0 || p.page_index >= m.documents[k].page_count)
            throw Error(Errc::out_of_range,
                        "page_index out of range for doc " + p.doc_id);
        const std::int64_t ord = offsets[k] + p.page_index;
        if (seen[ord])
            throw Error(Errc::duplicate_page,
                        "duplicate page entry: " + p.doc_id + " #" + std::to_string(p.page_index));
        seen[ord] = true;
        pooled[ord] = load_pooled(m.base_dir / p.pooled_path);
        multi[ord] = load_embeddings(m.base_dir / p.multi_path);
    }

    const auto& vs_entries = vs_override ? *vs_override : m.vs_pages;
    if (vs_entries.empty())
        throw Error(Errc::bad_manifest, "manifest has no vs_pages and no override supplied");

    std::vector<VSPageRecord> records;
    std::vector<PooledVector> vs_pooled;
    for (const auto& e : vs_entries) {
        const std::int32_t k = m.doc_index_of(e.doc_id);
        VSPageRecord rec;
        rec.id = {k, e.group_index};
        for (std::int32_t pi : e.member_pages) rec.member_pages.push_back({k, pi});
        records.push_back(std::move(rec));
        if (e.pooled_path.empty())
            throw Error(Errc::bad_manifest, "VS-page entry without pooled_path cannot be indexed");
        vs_pooled.push_back(load_pooled(m.base_dir / e.pooled_path));
    }

    return make_index(m.documents, std::move(pooled), std::move(multi), records,
                      std::move(vs_pooled));
}

// ---------------------------------------------------------------------------
// Layout annotations (JSONL)
// ---------------------------------------------------------------------------

inline std::vector<LayoutBox> load_layouts(const std::filesystem::path& path,
                                           const CorpusManifest& manifest) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_file, "cannot open layouts: " + path.string());
    std::vector<LayoutBox> boxes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(Errc::bad_manifest, path.string() + ":" + std::to_string(lineno) +
                                                ": " + std::string(e.what()));
        }
        LayoutBox box;
        box.page.doc_index = manifest.doc_index_of(rec.at("doc_id").get<std::string>());
        box.page.page_index = rec.at("page_index").get<std::int32_t>();
        box.klass = layout_class_from_string(rec.at("class").get<std::string>());
        const auto& bbox = rec.at("bbox");
        if (!bbox.is_array() || bbox.size() != 4)
            throw Error(Errc::bad_manifest, "layout bbox must be [x0,y0,x1,y1]");
        box.x0 = bbox[0].get<double>();
        box.y0 = bbox[1].get<double>();
        box.x1 = bbox[2].get<double>();
        box.y1 = bbox[3].get<double>();
        box.confidence = rec.at("confidence").get<double>();
        box.validate();
        boxes.push_back(box);
    }
    return boxes;
}

// ---------------------------------------------------------------------------
// Query file (JSONL)
// ---------------------------------------------------------------------------

struct QueryRecord {
    std::string query_id;
    std::string text;
    std::vector<std::string> tokens;
    EmbeddingMatrix token_embeddings;
    PooledVector pooled;
    std::vector<bool> key_mask;
    std::vector<PageId> ground_truth;         // sorted, unique
    std::optional<std::vector<bool>> aug_mask;  // augmentation-token rows
};

inline std::vector<QueryRecord> load_queries(const std::filesystem::path& path,
                                             const CorpusIndex& index) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_file, "cannot open queries: " + path.string());
    const auto base = path.parent_path();

    std::unordered_map<std::string, std::int32_t> doc_of;
    for (std::size_t k = 0; k < index.documents.size(); ++k)
        doc_of[index.documents[k].doc_id] = static_cast<std::int32_t>(k);

    std::vector<QueryRecord> queries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(Errc::bad_manifest, path.string() + ":" + std::to_string(lineno) +
                                                ": " + std::string(e.what()));
        }
        QueryRecord q;
        q.query_id = rec.at("query_id").get<std::string>();
        q.text = rec.at("text").get<std::string>();
        q.tokens = rec.at("tokens").get<std::vector<std::string>>();
        q.token_embeddings = load_embeddings(base / rec.at("multi_path").get<std::string>());
        q.pooled = load_pooled(base / rec.at("pooled_path").get<std::string>());
        if (static_cast<std::int64_t>(q.tokens.size()) != q.token_embeddings.rows)
            throw Error(Errc::bad_manifest,
                        "query " + q.query_id + ": token count != embedding rows");

        for (const auto& g : rec.at("gt")) {
            auto it = doc_of.find(g.at("doc_id").get<std::string>());
            if (it == doc_of.end())
                throw Error(Errc::unknown_doc,
                            "query " + q.query_id + ": ground-truth doc not in corpus");
            PageId p{it->second, g.at("page_index").get<std::int32_t>()};
            if (!index.contains(p))
                throw Error(Errc::out_of_range,
                            "query " + q.query_id + ": ground-truth page not in corpus");
            q.ground_truth.push_back(p);
        }
        std::sort(q.ground_truth.begin(), q.ground_truth.end());
        q.ground_truth.erase(std::unique(q.ground_truth.begin(), q.ground_truth.end()),
                             q.ground_truth.end());

        // key_mask overrides pos_tags overrides the bundled heuristic.
        if (rec.contains("key_mask")) {
            q.key_mask = rec.at("key_mask").get<std::vector<bool>>();
        } else if (rec.contains("pos_tags")) {
            auto tags = rec.at("pos_tags").get<std::vector<std::string>>();
            if (tags.size() != q.tokens.size())
                throw Error(Errc::bad_manifest,
                            "query " + q.query_id + ": pos_tags length != token count");
            q.key_mask = key_mask_from_tags(tags);
        } else {
            q.key_mask = heuristic_key_mask(q.tokens);
        }
        if (q.key_mask.size() != q.tokens.size())
            throw Error(Errc::bad_manifest,
                        "query " + q.query_id + ": key_mask length != token count");

        if (rec.contains("aug_mask")) {
            q.aug_mask = rec.at("aug_mask").get<std::vector<bool>>();
            if (q.aug_mask->size() != q.tokens.size())
                throw Error(Errc::bad_manifest,
                            "query " + q.query_id + ": aug_mask length != token count");
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

}  // namespace heaven
