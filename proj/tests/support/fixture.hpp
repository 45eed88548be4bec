#pragma once

// Writes small synthetic corpora to disk in the engine's external formats
// (corpus manifest, embedding files, layout and query JSONL). Test-only.

#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <json.hpp>

#include "heaven/embedding_io.hpp"
#include "heaven/vspage.hpp"
#include "support/synthetic.hpp"

namespace synth {

namespace fs = std::filesystem;

struct FixtureOptions {
    std::vector<std::int32_t> page_counts = {3, 5};
    std::int64_t d1 = 12;
    std::int64_t d2 = 8;
    std::int64_t rows = 3;   // multi-vector rows per page
    std::int32_t r = 2;      // VS-page window
    int n_queries = 3;
    std::int64_t n_q = 4;    // query token rows
    // One-hot construction: page ordinal o gets basis vector e_o in both
    // embedding spaces and query i plants a unique page it must retrieve
    // at rank 1. Overrides d1/d2 with the total page count.
    bool planted = false;
};

struct Fixture {
    fs::path dir;
    fs::path manifest;
    fs::path queries;
    fs::path layouts;
    std::vector<heaven::PageId> planted_pages;  // per query, when planted
};

inline heaven::PooledVector one_hot(std::int64_t dim, std::int64_t idx, float value = 1.0f) {
    heaven::PooledVector v;
    v.data.assign(dim, 0.0f);
    v.data[idx] = value;
    return v;
}

inline Fixture write_fixture(const fs::path& dir, Rng& rng, FixtureOptions opt) {
    fs::create_directories(dir);
    std::int64_t total_pages = 0;
    for (auto c : opt.page_counts) total_pages += c;
    if (opt.planted) opt.d1 = opt.d2 = total_pages;

    nlohmann::ordered_json manifest;
    manifest["documents"] = nlohmann::ordered_json::array();
    manifest["pages"] = nlohmann::ordered_json::array();
    manifest["vs_pages"] = nlohmann::ordered_json::array();

    std::int64_t ord = 0;
    std::vector<heaven::PooledVector> page_pooled;
    for (std::size_t k = 0; k < opt.page_counts.size(); ++k) {
        const std::string doc_id = "doc" + std::to_string(k);
        manifest["documents"].push_back({{"doc_id", doc_id},
                                         {"page_count", opt.page_counts[k]}});
        for (std::int32_t i = 0; i < opt.page_counts[k]; ++i, ++ord) {
            const std::string stem = "p" + std::to_string(k) + "_" + std::to_string(i);
            heaven::PooledVector pooled =
                opt.planted ? one_hot(opt.d1, ord) : random_pooled(rng, opt.d1);
            heaven::EmbeddingMatrix multi;
            if (opt.planted) {
                multi.rows = opt.rows;
                multi.dim = opt.d2;
                multi.data.assign(opt.rows * opt.d2, 0.0f);
                for (std::int64_t rr = 0; rr < opt.rows; ++rr)
                    multi.data[rr * opt.d2 + ord] = 1.0f;
            } else {
                multi = random_matrix(rng, opt.rows, opt.d2);
            }
            heaven::write_pooled(pooled, dir / (stem + ".pooled.hvne"));
            heaven::write_embeddings(multi, dir / (stem + ".multi.hvne"));
            page_pooled.push_back(pooled);
            manifest["pages"].push_back({{"doc_id", doc_id},
                                         {"page_index", i},
                                         {"pooled_path", stem + ".pooled.hvne"},
                                         {"multi_path", stem + ".multi.hvne"},
                                         {"width_px", 200},
                                         {"height_px", 300}});
        }
    }

    // VS-pages by consecutive windows; pooled VS embedding is the sum of the
    // members' pooled vectors in the planted construction, random otherwise.
    std::int64_t doc_offset = 0;
    for (std::size_t k = 0; k < opt.page_counts.size(); ++k) {
        const std::string doc_id = "doc" + std::to_string(k);
        const auto ranges = heaven::partition_document(
            opt.page_counts[k], std::min(opt.r, opt.page_counts[k]));
        for (std::size_t j = 0; j < ranges.size(); ++j) {
            const std::string stem = "vs" + std::to_string(k) + "_" + std::to_string(j);
            heaven::PooledVector pooled;
            if (opt.planted) {
                pooled.data.assign(opt.d1, 0.0f);
                for (std::int32_t i = ranges[j].begin; i < ranges[j].end; ++i)
                    pooled.data[doc_offset + i] = 1.0f;
            } else {
                pooled = random_pooled(rng, opt.d1);
            }
            heaven::write_pooled(pooled, dir / (stem + ".hvne"));
            nlohmann::ordered_json members = nlohmann::ordered_json::array();
            for (std::int32_t i = ranges[j].begin; i < ranges[j].end; ++i) members.push_back(i);
            manifest["vs_pages"].push_back(
                {{"doc_id", doc_id},
                 {"group_index", static_cast<std::int32_t>(j)},
                 {"member_pages", members},
                 {"crops", nlohmann::ordered_json::array()},
                 {"composite", {{"w", 1}, {"h", 1}}},
                 {"pooled_path", stem + ".hvne"}});
        }
        doc_offset += opt.page_counts[k];
    }

    Fixture fx;
    fx.dir = dir;
    fx.manifest = dir / "manifest.json";
    std::ofstream(fx.manifest) << manifest.dump(2) << "\n";

    // Layout annotations: one title on every even page.
    fx.layouts = dir / "layouts.jsonl";
    {
        std::ofstream out(fx.layouts);
        for (std::size_t k = 0; k < opt.page_counts.size(); ++k)
            for (std::int32_t i = 0; i < opt.page_counts[k]; i += 2)
                out << nlohmann::ordered_json{{"doc_id", "doc" + std::to_string(k)},
                                              {"page_index", i},
                                              {"class", "title"},
                                              {"bbox", {10.0, 10.0, 110.0, 30.0}},
                                              {"confidence", 0.9}}
                           .dump()
                    << "\n";
    }

    // Queries.
    fx.queries = dir / "queries.jsonl";
    {
        std::ofstream out(fx.queries);
        for (int qi = 0; qi < opt.n_queries; ++qi) {
            const std::string stem = "q" + std::to_string(qi);
            std::int64_t target_ord = (qi * 7 + 3) % total_pages;
            heaven::PooledVector pooled;
            heaven::EmbeddingMatrix multi;
            if (opt.planted) {
                pooled = one_hot(opt.d1, target_ord);
                multi.rows = opt.n_q;
                multi.dim = opt.d2;
                multi.data.assign(opt.n_q * opt.d2, 0.0f);
                for (std::int64_t rr = 0; rr < opt.n_q; ++rr)
                    multi.data[rr * opt.d2 + target_ord] = 1.0f;
            } else {
                pooled = random_pooled(rng, opt.d1);
                multi = random_matrix(rng, opt.n_q, opt.d2);
            }
            heaven::write_pooled(pooled, dir / (stem + ".pooled.hvne"));
            heaven::write_embeddings(multi, dir / (stem + ".multi.hvne"));

            // resolve target ordinal to (doc, page)
            std::int64_t off = 0;
            std::int32_t tdoc = 0, tpage = 0;
            for (std::size_t k = 0; k < opt.page_counts.size(); ++k) {
                if (target_ord < off + opt.page_counts[k]) {
                    tdoc = static_cast<std::int32_t>(k);
                    tpage = static_cast<std::int32_t>(target_ord - off);
                    break;
                }
                off += opt.page_counts[k];
            }
            if (opt.planted) fx.planted_pages.push_back({tdoc, tpage});

            nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
            nlohmann::ordered_json key_mask = nlohmann::ordered_json::array();
            for (std::int64_t t = 0; t < opt.n_q; ++t) {
                tokens.push_back("tok" + std::to_string(t));
                key_mask.push_back(t % 2 == 0);
            }
            out << nlohmann::ordered_json{
                       {"query_id", stem},
                       {"text", "synthetic query " + std::to_string(qi)},
                       {"tokens", tokens},
                       {"pooled_path", stem + ".pooled.hvne"},
                       {"multi_path", stem + ".multi.hvne"},
                       {"gt", {{{"doc_id", "doc" + std::to_string(tdoc)},
                                {"page_index", tpage}}}},
                       {"key_mask", key_mask}}
                       .dump()
                << "\n";
        }
    }
    return fx;
}

}  // namespace synth
