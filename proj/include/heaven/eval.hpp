#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "heaven/corpus.hpp"
#include "heaven/types.hpp"

namespace heaven {

/// |gt intersect top-k| / |gt|.
inline double recall_at_k(const std::vector<PageId>& ranking, const std::vector<PageId>& gt,
                          std::int64_t k) {
    if (gt.empty()) throw Error(Errc::empty_input, "recall_at_k: empty ground truth");
    if (k < 1) throw Error(Errc::invalid_argument, "recall_at_k: k < 1");
    const std::set<PageId> gt_set(gt.begin(), gt.end());
    const auto cutoff = std::min<std::int64_t>(k, static_cast<std::int64_t>(ranking.size()));
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < cutoff; ++i)
        if (gt_set.count(ranking[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(gt_set.size());
}

/// A page with a score, or unscored (pages the pipeline never touched).
struct RankedPage {
    PageId page;
    bool scored = false;
    double score = 0.0;
};

struct DocScore {
    std::int32_t doc_index = 0;
    double score = -std::numeric_limits<double>::infinity();
    std::int64_t best_rank = std::numeric_limits<std::int64_t>::max();
};

/// Document score = max over the document's page scores. Unscored pages
/// contribute -inf; document order falls back to the best page's position in
/// the input ranking, then doc index.
inline std::vector<DocScore> doc_level_scores(const std::vector<RankedPage>& ranking,
                                              const std::vector<DocumentMeta>& docs) {
    std::vector<DocScore> out(docs.size());
    for (std::size_t k = 0; k < docs.size(); ++k) out[k].doc_index = static_cast<std::int32_t>(k);
    for (std::size_t rank = 0; rank < ranking.size(); ++rank) {
        const auto& rp = ranking[rank];
        if (rp.page.doc_index < 0 || rp.page.doc_index >= static_cast<std::int32_t>(docs.size()))
            throw Error(Errc::out_of_range, "doc_level_scores: page references unknown document");
        auto& ds = out[rp.page.doc_index];
        const double s = rp.scored ? rp.score : -std::numeric_limits<double>::infinity();
        const bool better = s > ds.score ||
                            (s == ds.score && static_cast<std::int64_t>(rank) < ds.best_rank);
        if (better) {
            ds.score = s;
            ds.best_rank = static_cast<std::int64_t>(rank);
        }
    }
    std::sort(out.begin(), out.end(), [](const DocScore& a, const DocScore& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.best_rank != b.best_rank) return a.best_rank < b.best_rank;
        return a.doc_index < b.doc_index;
    });
    return out;
}

struct QueryFilterResult {
    std::vector<std::size_t> kept;     // indices into the input
    std::vector<std::size_t> removed;
};

/// Drops context-dependent queries ("Table N" / "Figure N", N a number or a
/// roman numeral) and unanswerable queries with empty ground truth.
inline QueryFilterResult heuristic_query_filter(const std::vector<QueryRecord>& queries) {
    static const std::regex pattern(
        R"(\b(table|figure|fig\.?)\s+(\d+|[ivxlcdm]+)\b)",
        std::regex::icase);
    QueryFilterResult res;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const bool context_dependent = std::regex_search(queries[i].text, pattern);
        if (context_dependent || queries[i].ground_truth.empty())
            res.removed.push_back(i);
        else
            res.kept.push_back(i);
    }
    return res;
}

struct EvalRow {
    std::string run_id;
    std::int32_t r = 15;
    double p1 = 0.5;
    double p2 = 0.25;
    std::int32_t top_k = 200;
    double alpha = 0.1;
    double beta = 0.3;
    std::int64_t query_count = 0;
    double recall_at_1 = 0.0;
    double recall_at_3 = 0.0;
    double recall_at_100 = 0.0;
    double recall_at_200 = 0.0;
    double flops_total_B = 0.0;  // mean per-query FLOPs, in billions
    double latency_s = 0.0;
};

inline constexpr const char* kReportHeader =
    "run_id,r,p1,p2,topk,alpha,beta,query_count,"
    "recall_at_1,recall_at_3,recall_at_100,recall_at_200,flops_total_B,latency_s";

namespace detail {

inline std::string fixed6(double v) {
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(6);
    ss << v;
    return ss.str();
}

}  // namespace detail

inline std::string report_line(const EvalRow& row) {
    std::ostringstream ss;
    ss << row.run_id << ',' << row.r << ',' << detail::fixed6(row.p1) << ','
       << detail::fixed6(row.p2) << ',' << row.top_k << ',' << detail::fixed6(row.alpha) << ','
       << detail::fixed6(row.beta) << ',' << row.query_count << ','
       << detail::fixed6(row.recall_at_1) << ',' << detail::fixed6(row.recall_at_3) << ','
       << detail::fixed6(row.recall_at_100) << ',' << detail::fixed6(row.recall_at_200) << ','
       << detail::fixed6(row.flops_total_B) << ',' << detail::fixed6(row.latency_s);
    return ss.str();
}

inline void emit_report(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot open for write: " + path.string());
    out << kReportHeader << '\n';
    for (const auto& row : rows) out << report_line(row) << '\n';
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

inline std::vector<EvalRow> parse_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_file, "cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader)
        throw Error(Errc::bad_manifest, "report header mismatch: " + path.string());
    std::vector<EvalRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        auto next = [&]() {
            if (!std::getline(ss, field, ','))
                throw Error(Errc::bad_manifest, "short report row");
            return field;
        };
        EvalRow row;
        row.run_id = next();
        row.r = std::stoi(next());
        row.p1 = std::stod(next());
        row.p2 = std::stod(next());
        row.top_k = std::stoi(next());
        row.alpha = std::stod(next());
        row.beta = std::stod(next());
        row.query_count = std::stoll(next());
        row.recall_at_1 = std::stod(next());
        row.recall_at_3 = std::stod(next());
        row.recall_at_100 = std::stod(next());
        row.recall_at_200 = std::stod(next());
        row.flops_total_B = std::stod(next());
        row.latency_s = std::stod(next());
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace heaven
