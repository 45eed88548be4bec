#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "heaven/corpus.hpp"
#include "heaven/scoring.hpp"
#include "heaven/types.hpp"

namespace heaven {

struct PipelineConfig {
    std::int32_t r = 15;   // reduction-factor cap; short documents use |D_k|
    double p1 = 0.5;
    double p2 = 0.25;
    std::int32_t top_k = 200;
    double alpha = 0.1;
    double beta = 0.3;

    void validate() const {
        if (r < 1) throw Error(Errc::invalid_argument, "config: r < 1");
        if (!(p1 > 0.0 && p1 <= 1.0)) throw Error(Errc::invalid_argument, "config: p1 outside (0,1]");
        if (!(p2 > 0.0 && p2 <= 1.0)) throw Error(Errc::invalid_argument, "config: p2 outside (0,1]");
        if (top_k < 1) throw Error(Errc::invalid_argument, "config: K < 1");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "config: alpha outside [0,1]");
        if (!(beta >= 0.0 && beta <= 1.0)) throw Error(Errc::invalid_argument, "config: beta outside [0,1]");
    }
};

struct StageTrace {
    std::vector<Scored<VSPageId>> vs_ranking;       // all VS-pages, ranked
    std::vector<Scored<VSPageId>> retained_vs;      // top-p1 prefix
    std::vector<PageId> candidates;                 // expanded candidate pages, id order
    std::vector<Scored<PageId>> refined_all;        // candidates ranked by fused SV score
    std::vector<Scored<PageId>> refined_topk;       // top-K prefix of refined_all
    std::vector<Scored<PageId>> filtered_ranking;   // top-K ranked by key-token MaxSim
    std::vector<Scored<PageId>> final_candidates;   // top-p2, ranked by fused MV score
    std::vector<PageId> final_ranking;              // full permutation of the corpus
    FlopsLedger ledger;
    std::int32_t degenerate_mask_substitutions = 0;

    // fused single-vector scores for candidate pages, keyed by page ordinal
    std::unordered_map<std::int64_t, double> fused_sv;
};

/// Stage 1: score every VS-page, keep the top-p1, expand to member pages,
/// fuse VS-level and page-level scores, keep the top-K.
inline StageTrace stage1(const QueryRecord& query, const CorpusIndex& index,
                         const PipelineConfig& cfg) {
    cfg.validate();
    if (index.page_count() == 0 || index.vs_count() == 0)
        throw Error(Errc::empty_input, "stage1: empty corpus");
    if (query.pooled.dim() != index.dim_single)
        throw Error(Errc::dimension_mismatch, "stage1: query pooled dim != index dim_single");

    StageTrace trace;
    std::vector<double> vs_scores(index.vs_count());
    std::vector<Scored<VSPageId>> scored;
    scored.reserve(index.vs_count());
    for (std::int64_t v = 0; v < index.vs_count(); ++v) {
        vs_scores[v] = dot_score(query.pooled, index.vs_pooled[v], &trace.ledger.stage1_vs);
        scored.push_back({index.gamma.vs_ids[v], vs_scores[v]});
    }
    trace.vs_ranking = sorted_by_rank(std::move(scored));

    const auto keep = ceil_fraction(index.vs_count(), cfg.p1);
    trace.retained_vs.assign(trace.vs_ranking.begin(), trace.vs_ranking.begin() + keep);

    // Expand to member pages; dedup is a safety net, the window partition
    // cannot produce overlaps.
    std::unordered_set<std::int64_t> seen;
    for (const auto& vs : trace.retained_vs) {
        for (PageId p : index.gamma.forward[index.vs_ordinal(vs.id)])
            if (seen.insert(index.page_ordinal(p)).second) trace.candidates.push_back(p);
    }
    std::sort(trace.candidates.begin(), trace.candidates.end());

    std::vector<Scored<PageId>> refined;
    refined.reserve(trace.candidates.size());
    for (PageId p : trace.candidates) {
        const double page_score =
            dot_score(query.pooled, index.pooled(p), &trace.ledger.stage1_refine);
        const double vs_score = vs_scores[index.vs_ordinal_of(p)];
        const double fused =
            fuse(vs_score, page_score, cfg.alpha, &trace.ledger.stage1_refine);
        trace.fused_sv[index.page_ordinal(p)] = fused;
        refined.push_back({p, fused});
    }
    trace.refined_all = sorted_by_rank(std::move(refined));
    const auto k = std::min<std::int64_t>(cfg.top_k,
                                          static_cast<std::int64_t>(trace.refined_all.size()));
    trace.refined_topk.assign(trace.refined_all.begin(), trace.refined_all.begin() + k);
    return trace;
}

/// Stage 2: key-token-filtered MaxSim over the top-K, keep the top-p2, then
/// full MaxSim fused with the stage-1 score for the final head ordering.
inline void stage2(const QueryRecord& query, StageTrace& trace, const CorpusIndex& index,
                   const PipelineConfig& cfg) {
    if (trace.refined_topk.empty()) throw Error(Errc::empty_input, "stage2: empty top-K set");
    if (query.token_embeddings.dim != index.dim_multi)
        throw Error(Errc::dimension_mismatch, "stage2: query token dim != index dim_multi");

    std::vector<bool> mask = query.key_mask;
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
        mask.assign(mask.size(), true);
        ++trace.degenerate_mask_substitutions;
    }

    std::vector<Scored<PageId>> filtered;
    filtered.reserve(trace.refined_topk.size());
    for (const auto& item : trace.refined_topk) {
        const double s = masked_maxsim_score(query.token_embeddings, mask,
                                             index.multi(item.id),
                                             &trace.ledger.stage2_filtered);
        filtered.push_back({item.id, s});
    }
    trace.filtered_ranking = sorted_by_rank(std::move(filtered));

    const auto keep =
        ceil_fraction(static_cast<std::int64_t>(trace.filtered_ranking.size()), cfg.p2);
    std::vector<Scored<PageId>> final_scored;
    final_scored.reserve(keep);
    for (std::int64_t i = 0; i < keep; ++i) {
        const PageId p = trace.filtered_ranking[i].id;
        const double mv = maxsim_score(query.token_embeddings, index.multi(p),
                                       &trace.ledger.stage2_refine);
        const double fused = fuse(trace.fused_sv.at(index.page_ordinal(p)), mv, cfg.beta,
                                  &trace.ledger.stage2_refine);
        final_scored.push_back({p, fused});
    }
    trace.final_candidates = sorted_by_rank(std::move(final_scored));
}

/// Full corpus permutation: the final reranked head, then the rest of the
/// top-K by filtered score, then the remaining candidates by stage-1 score,
/// then unscored pages in VS-ranking order (member order within a VS-page).
inline std::vector<PageId> full_ranking(const StageTrace& trace, const CorpusIndex& index) {
    std::vector<PageId> out;
    out.reserve(index.page_count());
    std::unordered_set<std::int64_t> emitted;
    auto emit = [&](PageId p) {
        if (emitted.insert(index.page_ordinal(p)).second) out.push_back(p);
    };

    for (const auto& s : trace.final_candidates) emit(s.id);
    for (const auto& s : trace.filtered_ranking) emit(s.id);
    for (const auto& s : trace.refined_all) emit(s.id);

    for (const auto& vs : trace.vs_ranking)
        for (PageId p : index.gamma.forward[index.vs_ordinal(vs.id)]) emit(p);

    if (static_cast<std::int64_t>(out.size()) != index.page_count())
        throw Error(Errc::out_of_range, "full_ranking: permutation does not cover the corpus");
    return out;
}

inline StageTrace run_query(const QueryRecord& query, const CorpusIndex& index,
                            const PipelineConfig& cfg) {
    StageTrace trace = stage1(query, index, cfg);
    stage2(query, trace, index, cfg);
    trace.final_ranking = full_ranking(trace, index);
    return trace;
}

// ---------------------------------------------------------------------------
// Trace dump (JSONL, one record per query)
// ---------------------------------------------------------------------------

struct TraceDump {
    std::string query_id;
    std::vector<Scored<VSPageId>> vs_ranking;
    std::vector<PageId> candidates;
    std::vector<Scored<PageId>> refined_topk;
    std::vector<Scored<PageId>> filtered_ranking;
    std::vector<Scored<PageId>> final_candidates;
    std::vector<PageId> final_ranking;
    FlopsLedger ledger;
    std::int32_t degenerate_mask_substitutions = 0;

    bool operator==(const TraceDump&) const = default;

    static TraceDump from_trace(const std::string& query_id, const StageTrace& t) {
        return {query_id,          t.vs_ranking,       t.candidates,
                t.refined_topk,    t.filtered_ranking, t.final_candidates,
                t.final_ranking,   t.ledger,           t.degenerate_mask_substitutions};
    }
};

namespace detail {

inline ordered_json page_to_json(PageId p) {
    return ordered_json{{"doc", p.doc_index}, {"page", p.page_index}};
}

inline ordered_json scored_page_to_json(const Scored<PageId>& s) {
    return ordered_json{{"doc", s.id.doc_index}, {"page", s.id.page_index}, {"score", s.score}};
}

inline ordered_json scored_vs_to_json(const Scored<VSPageId>& s) {
    return ordered_json{{"doc", s.id.doc_index}, {"group", s.id.group_index}, {"score", s.score}};
}

inline PageId page_from_json(const json& j) {
    return {j.at("doc").get<std::int32_t>(), j.at("page").get<std::int32_t>()};
}

}  // namespace detail

inline ordered_json trace_dump_to_json(const TraceDump& t) {
    ordered_json j;
    j["query_id"] = t.query_id;
    auto arr = [](auto&& range, auto&& f) {
        ordered_json a = ordered_json::array();
        for (const auto& x : range) a.push_back(f(x));
        return a;
    };
    j["vs_ranking"] = arr(t.vs_ranking, detail::scored_vs_to_json);
    j["candidates"] = arr(t.candidates, detail::page_to_json);
    j["refined_topk"] = arr(t.refined_topk, detail::scored_page_to_json);
    j["filtered_ranking"] = arr(t.filtered_ranking, detail::scored_page_to_json);
    j["final_candidates"] = arr(t.final_candidates, detail::scored_page_to_json);
    j["final_ranking"] = arr(t.final_ranking, detail::page_to_json);
    j["ledger"] = ordered_json{{"stage1_vs", t.ledger.stage1_vs},
                               {"stage1_refine", t.ledger.stage1_refine},
                               {"stage2_filtered", t.ledger.stage2_filtered},
                               {"stage2_refine", t.ledger.stage2_refine},
                               {"variant", t.ledger.variant}};
    j["degenerate_mask_substitutions"] = t.degenerate_mask_substitutions;
    return j;
}

inline TraceDump trace_dump_from_json(const json& j) {
    TraceDump t;
    t.query_id = j.at("query_id").get<std::string>();
    for (const auto& e : j.at("vs_ranking"))
        t.vs_ranking.push_back({{e.at("doc").get<std::int32_t>(), e.at("group").get<std::int32_t>()},
                                e.at("score").get<double>()});
    for (const auto& e : j.at("candidates")) t.candidates.push_back(detail::page_from_json(e));
    auto scored_pages = [](const json& a) {
        std::vector<Scored<PageId>> out;
        for (const auto& e : a)
            out.push_back({detail::page_from_json(e), e.at("score").get<double>()});
        return out;
    };
    t.refined_topk = scored_pages(j.at("refined_topk"));
    t.filtered_ranking = scored_pages(j.at("filtered_ranking"));
    t.final_candidates = scored_pages(j.at("final_candidates"));
    for (const auto& e : j.at("final_ranking")) t.final_ranking.push_back(detail::page_from_json(e));
    const auto& l = j.at("ledger");
    t.ledger.stage1_vs = l.at("stage1_vs").get<std::uint64_t>();
    t.ledger.stage1_refine = l.at("stage1_refine").get<std::uint64_t>();
    t.ledger.stage2_filtered = l.at("stage2_filtered").get<std::uint64_t>();
    t.ledger.stage2_refine = l.at("stage2_refine").get<std::uint64_t>();
    t.ledger.variant = l.at("variant").get<std::uint64_t>();
    t.degenerate_mask_substitutions = j.at("degenerate_mask_substitutions").get<std::int32_t>();
    return t;
}

inline void write_trace_dumps(const std::vector<TraceDump>& traces,
                              const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot open for write: " + path.string());
    for (const auto& t : traces) out << trace_dump_to_json(t).dump() << '\n';
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

inline std::vector<TraceDump> read_trace_dumps(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::missing_file, "cannot open: " + path.string());
    std::vector<TraceDump> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(trace_dump_from_json(json::parse(line)));
    }
    return out;
}

}  // namespace heaven
