// heaven: two-stage hybrid-vector retrieval over visually-summarized pages.
//
// Subcommands: index, build-vspages, search, evaluate, sweep.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "heaven/corpus.hpp"
#include "heaven/embedding_io.hpp"
#include "heaven/eval.hpp"
#include "heaven/pipeline.hpp"
#include "heaven/png_io.hpp"
#include "heaven/variants.hpp"
#include "heaven/vspage.hpp"

namespace {

int log_level() {
    // HEAVEN_LOG: error (default) | info | debug
    const char* env = std::getenv("HEAVEN_LOG");
    if (!env) return 0;
    std::string v(env);
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[heaven] " << msg << "\n";
}

heaven::CorpusIndex load_index(const std::string& manifest, const std::string& vspages) {
    if (vspages.empty()) return heaven::build_index(manifest);
    auto entries = heaven::read_vs_manifest(vspages);
    return heaven::build_index(manifest, &entries);
}

/// Runs fn(i) for i in [0, n) on `threads` workers. Output ordering is the
/// caller's responsibility (write into a preallocated slot per item).
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || n <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct CommonPipelineFlags {
    std::string manifest;
    std::string vspages;
    heaven::PipelineConfig cfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--manifest", manifest, "corpus manifest (JSON)")->required();
        cmd->add_option("--vspages", vspages, "VS-page manifest (JSONL), overrides the manifest's vs_pages");
        cmd->add_option("--reduction-factor", cfg.r, "reduction factor r cap");
        cmd->add_option("--p1", cfg.p1, "stage-1 retained fraction");
        cmd->add_option("--p2", cfg.p2, "stage-2 retained fraction");
        cmd->add_option("--topk", cfg.top_k, "stage-1 candidate count K");
        cmd->add_option("--alpha", cfg.alpha, "stage-1 fusion weight");
        cmd->add_option("--beta", cfg.beta, "stage-2 fusion weight");
    }
};

// ---------------------------------------------------------------------------

int cmd_index(const std::string& manifest, const std::string& vspages) {
    const auto index = load_index(manifest, vspages);
    std::int64_t total_multi_rows = 0;
    for (const auto& m : index.page_multi) total_multi_rows += m.rows;
    std::cout << "documents: " << index.documents.size() << "\n"
              << "pages: " << index.page_count() << "\n"
              << "vs_pages: " << index.vs_count() << "\n"
              << "dim_single: " << index.dim_single << "\n"
              << "dim_multi: " << index.dim_multi << "\n"
              << "multi_rows_total: " << total_multi_rows << "\n";
    return 0;
}

int cmd_build_vspages(const std::string& manifest_path, const std::string& layouts_path,
                      std::int32_t r, const std::string& out_path,
                      const std::string& render_dir, const std::string& page_images) {
    const auto manifest = heaven::load_manifest(manifest_path);
    const auto layouts = heaven::load_layouts(layouts_path, manifest);

    std::map<heaven::PageId, heaven::PageDims> dims;
    for (const auto& p : manifest.pages)
        if (p.dims)
            dims[{manifest.doc_index_of(p.doc_id), p.page_index}] = *p.dims;

    std::vector<heaven::VsManifestEntry> entries;
    for (std::size_t k = 0; k < manifest.documents.size(); ++k) {
        const auto& doc = manifest.documents[k];
        std::vector<heaven::LayoutBox> titles;
        for (const auto& box : layouts)
            if (box.page.doc_index == static_cast<std::int32_t>(k) &&
                box.klass == heaven::LayoutClass::title)
                titles.push_back(box);
        const auto records =
            heaven::build_vs_pages(static_cast<std::int32_t>(k), doc, titles, r);
        for (const auto& rec : records) {
            const auto assembly = heaven::assemble_manifest(rec, dims);
            heaven::VsManifestEntry e;
            e.doc_id = doc.doc_id;
            e.group_index = rec.id.group_index;
            for (const auto& p : rec.member_pages) e.member_pages.push_back(p.page_index);
            for (const auto& c : assembly.crops)
                e.crops.push_back({c.source.page_index, c.x0, c.y0, c.x1, c.y1, c.target_y});
            e.composite_w = assembly.width;
            e.composite_h = assembly.height;
            entries.push_back(std::move(e));

            if (!render_dir.empty()) {
                const auto raster = heaven::render_vs_page(
                    assembly, [&](heaven::PageId p) -> const heaven::Raster* {
                        static thread_local heaven::Raster scratch;
                        if (!page_images.empty()) {
                            const auto file = std::filesystem::path(page_images) /
                                              (doc.doc_id + "_" + std::to_string(p.page_index) +
                                               ".png");
                            scratch = heaven::read_png(file);
                            return &scratch;
                        }
                        auto it = dims.find(p);
                        if (it == dims.end()) return nullptr;
                        scratch = heaven::Raster::blank(it->second.width, it->second.height);
                        return &scratch;
                    });
                const auto png = std::filesystem::path(render_dir) /
                                 (doc.doc_id + "_vs" + std::to_string(rec.id.group_index) +
                                  ".png");
                heaven::write_png(raster, png);
            }
        }
    }
    heaven::write_vs_manifest(entries, out_path);
    std::cout << "vs_pages: " << entries.size() << "\n";
    return 0;
}

int cmd_search(const CommonPipelineFlags& flags, const std::string& queries_path,
               std::int64_t top_n, bool as_json, const std::string& trace_path) {
    const auto index = load_index(flags.manifest, flags.vspages);
    const auto queries = heaven::load_queries(queries_path, index);

    std::vector<heaven::TraceDump> dumps;
    for (const auto& q : queries) {
        const auto trace = heaven::run_query(q, index, flags.cfg);
        if (!trace_path.empty()) dumps.push_back(heaven::TraceDump::from_trace(q.query_id, trace));

        const auto n = std::min<std::int64_t>(top_n, static_cast<std::int64_t>(
                                                         trace.final_ranking.size()));
        if (as_json) {
            heaven::ordered_json out;
            out["query_id"] = q.query_id;
            out["results"] = heaven::ordered_json::array();
            for (std::int64_t i = 0; i < n; ++i) {
                const auto p = trace.final_ranking[i];
                heaven::ordered_json row{{"rank", i + 1},
                                         {"doc_id", index.documents[p.doc_index].doc_id},
                                         {"page_index", p.page_index}};
                if (i < static_cast<std::int64_t>(trace.final_candidates.size()))
                    row["score"] = trace.final_candidates[i].score;
                out["results"].push_back(row);
            }
            out["flops_total"] = trace.ledger.total();
            std::cout << out.dump() << "\n";
        } else {
            std::cout << "query " << q.query_id << " (" << q.text << ")\n";
            for (std::int64_t i = 0; i < n; ++i) {
                const auto p = trace.final_ranking[i];
                std::cout << "  " << (i + 1) << ". " << index.documents[p.doc_index].doc_id
                          << " page " << p.page_index;
                if (i < static_cast<std::int64_t>(trace.final_candidates.size()))
                    std::cout << "  score " << trace.final_candidates[i].score;
                std::cout << "\n";
            }
            std::cout << "  flops " << trace.ledger.total() << "\n";
        }
    }
    if (!trace_path.empty()) heaven::write_trace_dumps(dumps, trace_path);
    return 0;
}

int cmd_evaluate(const CommonPipelineFlags& flags, const std::string& queries_path,
                 const std::string& out_csv, const std::string& run_id, int threads,
                 bool filter, bool measure_latency, const std::string& trace_path) {
    const auto index = load_index(flags.manifest, flags.vspages);
    auto queries = heaven::load_queries(queries_path, index);

    std::size_t removed = 0;
    if (filter) {
        const auto res = heaven::heuristic_query_filter(queries);
        removed = res.removed.size();
        std::vector<heaven::QueryRecord> kept;
        kept.reserve(res.kept.size());
        for (auto i : res.kept) kept.push_back(std::move(queries[i]));
        queries = std::move(kept);
    }
    if (queries.empty()) {
        heaven::emit_report({}, out_csv);
        log_info("no queries after filtering; wrote header-only report");
        return 0;
    }

    struct PerQuery {
        double r1, r3, r100, r200;
        std::uint64_t flops;
        heaven::TraceDump dump;
    };
    std::vector<PerQuery> results(queries.size());
    const bool want_traces = !trace_path.empty();

    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(static_cast<std::int64_t>(queries.size()), threads, [&](std::int64_t i) {
        const auto& q = queries[i];
        const auto trace = heaven::run_query(q, index, flags.cfg);
        PerQuery r;
        r.r1 = heaven::recall_at_k(trace.final_ranking, q.ground_truth, 1);
        r.r3 = heaven::recall_at_k(trace.final_ranking, q.ground_truth, 3);
        r.r100 = heaven::recall_at_k(trace.final_ranking, q.ground_truth, 100);
        r.r200 = heaven::recall_at_k(trace.final_ranking, q.ground_truth, 200);
        r.flops = trace.ledger.total();
        if (want_traces) r.dump = heaven::TraceDump::from_trace(q.query_id, trace);
        results[i] = std::move(r);
    });
    const auto elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    heaven::EvalRow row;
    row.run_id = run_id;
    row.r = flags.cfg.r;
    row.p1 = flags.cfg.p1;
    row.p2 = flags.cfg.p2;
    row.top_k = flags.cfg.top_k;
    row.alpha = flags.cfg.alpha;
    row.beta = flags.cfg.beta;
    row.query_count = static_cast<std::int64_t>(queries.size());
    double sum_flops = 0.0;
    for (const auto& r : results) {
        row.recall_at_1 += r.r1;
        row.recall_at_3 += r.r3;
        row.recall_at_100 += r.r100;
        row.recall_at_200 += r.r200;
        sum_flops += static_cast<double>(r.flops);
    }
    const auto n = static_cast<double>(queries.size());
    row.recall_at_1 /= n;
    row.recall_at_3 /= n;
    row.recall_at_100 /= n;
    row.recall_at_200 /= n;
    row.flops_total_B = sum_flops / n / 1e9;
    // Wall time goes into the CSV only on request; the default report is
    // byte-stable across runs and thread counts.
    row.latency_s = measure_latency ? elapsed : 0.0;
    heaven::emit_report({row}, out_csv);

    if (want_traces) {
        std::vector<heaven::TraceDump> dumps;
        dumps.reserve(results.size());
        for (auto& r : results) dumps.push_back(std::move(r.dump));
        heaven::write_trace_dumps(dumps, trace_path);
    }
    log_info("evaluated " + std::to_string(queries.size()) + " queries (" +
             std::to_string(removed) + " filtered) in " + std::to_string(elapsed) + "s");
    return 0;
}

int cmd_sweep(const CommonPipelineFlags& flags, const std::string& queries_path,
              const std::string& out_csv, const std::string& variant_name,
              const std::vector<std::int32_t>& factors, const std::vector<double>& ratios,
              std::uint64_t seed, int threads) {
    const auto index = load_index(flags.manifest, flags.vspages);
    const auto queries = heaven::load_queries(queries_path, index);
    if (queries.empty()) throw heaven::Error(heaven::Errc::empty_input, "sweep: no queries");

    const auto kind = heaven::variant_kind_from_string(variant_name);
    const bool pooling =
        kind == heaven::VariantKind::doc_pool || kind == heaven::VariantKind::query_pool;
    if (pooling && factors.empty())
        throw heaven::Error(heaven::Errc::invalid_argument, "sweep: pooling needs --factors");
    if (!pooling && ratios.empty())
        throw heaven::Error(heaven::Errc::invalid_argument, "sweep: pruning needs --ratios");

    std::vector<heaven::EvalRow> rows;
    const std::size_t n_configs = pooling ? factors.size() : ratios.size();
    for (std::size_t c = 0; c < n_configs; ++c) {
        heaven::VariantConfig vcfg;
        vcfg.kind = kind;
        vcfg.seed = seed;
        std::ostringstream run_id;
        run_id << variant_name << "_";
        if (pooling) {
            vcfg.pool_factor = factors[c];
            run_id << "f" << factors[c];
        } else {
            vcfg.prune_ratio = ratios[c];
            run_id << "r" << heaven::detail::fixed6(ratios[c]);
        }

        struct PerQuery {
            double r1, r3, r100, r200;
            std::uint64_t flops;
        };
        std::vector<PerQuery> results(queries.size());
        parallel_for(static_cast<std::int64_t>(queries.size()), threads, [&](std::int64_t i) {
            const auto [ranking, ledger] = heaven::variant_retrieval(queries[i], index, vcfg);
            std::vector<heaven::PageId> ids;
            ids.reserve(ranking.size());
            for (const auto& s : ranking) ids.push_back(s.id);
            results[i] = {heaven::recall_at_k(ids, queries[i].ground_truth, 1),
                          heaven::recall_at_k(ids, queries[i].ground_truth, 3),
                          heaven::recall_at_k(ids, queries[i].ground_truth, 100),
                          heaven::recall_at_k(ids, queries[i].ground_truth, 200),
                          ledger.total()};
        });

        heaven::EvalRow row;
        row.run_id = run_id.str();
        row.r = flags.cfg.r;
        row.p1 = flags.cfg.p1;
        row.p2 = flags.cfg.p2;
        row.top_k = flags.cfg.top_k;
        row.alpha = flags.cfg.alpha;
        row.beta = flags.cfg.beta;
        row.query_count = static_cast<std::int64_t>(queries.size());
        double sum_flops = 0.0;
        for (const auto& r : results) {
            row.recall_at_1 += r.r1;
            row.recall_at_3 += r.r3;
            row.recall_at_100 += r.r100;
            row.recall_at_200 += r.r200;
            sum_flops += static_cast<double>(r.flops);
        }
        const auto n = static_cast<double>(queries.size());
        row.recall_at_1 /= n;
        row.recall_at_3 /= n;
        row.recall_at_100 /= n;
        row.recall_at_200 /= n;
        row.flops_total_B = sum_flops / n / 1e9;
        rows.push_back(std::move(row));
        log_info("sweep config " + rows.back().run_id + " done");
    }
    heaven::emit_report(rows, out_csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid-vector visual document retrieval engine"};
    app.require_subcommand(1);

    // index
    auto* index_cmd = app.add_subcommand("index", "build and validate a corpus index");
    std::string idx_manifest, idx_vspages;
    index_cmd->add_option("--manifest", idx_manifest)->required();
    index_cmd->add_option("--vspages", idx_vspages);

    // build-vspages
    auto* bvs = app.add_subcommand("build-vspages", "construct VS-pages from layout annotations");
    std::string bvs_manifest, bvs_layouts, bvs_out, bvs_render, bvs_images;
    std::int32_t bvs_r = 15;
    bvs->add_option("--manifest", bvs_manifest)->required();
    bvs->add_option("--layouts", bvs_layouts)->required();
    bvs->add_option("--reduction-factor", bvs_r);
    bvs->add_option("--out", bvs_out)->required();
    bvs->add_option("--render-dir", bvs_render);
    bvs->add_option("--page-images", bvs_images, "directory of <doc_id>_<page>.png rasters");

    // search
    auto* search = app.add_subcommand("search", "run queries and print ranked pages");
    CommonPipelineFlags search_flags;
    search_flags.attach(search);
    std::string search_queries, search_trace;
    std::int64_t search_top = 10;
    bool search_json = false;
    search->add_option("--queries", search_queries)->required();
    search->add_option("--top", search_top, "results to print per query");
    search->add_flag("--json", search_json, "machine-readable output");
    search->add_option("--trace", search_trace, "write per-query trace dumps (JSONL)");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "batch pipeline evaluation with CSV report");
    CommonPipelineFlags eval_flags;
    eval_flags.attach(eval);
    std::string eval_queries, eval_out, eval_run_id = "heaven", eval_trace;
    int eval_threads = 1;
    std::uint64_t eval_seed = 0;
    bool eval_filter = false, eval_latency = false;
    eval->add_option("--queries", eval_queries)->required();
    eval->add_option("--out", eval_out)->required();
    eval->add_option("--run-id", eval_run_id);
    eval->add_option("--threads", eval_threads);
    eval->add_option("--seed", eval_seed);
    eval->add_flag("--filter", eval_filter, "apply the heuristic query filter");
    eval->add_flag("--measure-latency", eval_latency, "put wall time in the CSV");
    eval->add_option("--trace", eval_trace, "write per-query trace dumps (JSONL)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "efficiency-variant grid over pool factors / prune ratios");
    CommonPipelineFlags sweep_flags;
    sweep_flags.attach(sweep);
    std::string sweep_queries, sweep_out, sweep_variant;
    std::vector<std::int32_t> sweep_factors;
    std::vector<double> sweep_ratios;
    std::uint64_t sweep_seed = 0;
    int sweep_threads = 1;
    sweep->add_option("--queries", sweep_queries)->required();
    sweep->add_option("--out", sweep_out)->required();
    sweep->add_option("--variant", sweep_variant,
                      "doc_pool | doc_prune | query_pool | query_prune")
        ->required();
    sweep->add_option("--factors", sweep_factors)->delimiter(',');
    sweep->add_option("--ratios", sweep_ratios)->delimiter(',');
    sweep->add_option("--seed", sweep_seed);
    sweep->add_option("--threads", sweep_threads);

    CLI11_PARSE(app, argc, argv);

    try {
        if (index_cmd->parsed()) return cmd_index(idx_manifest, idx_vspages);
        if (bvs->parsed())
            return cmd_build_vspages(bvs_manifest, bvs_layouts, bvs_r, bvs_out, bvs_render,
                                     bvs_images);
        if (search->parsed())
            return cmd_search(search_flags, search_queries, search_top, search_json,
                              search_trace);
        if (eval->parsed())
            return cmd_evaluate(eval_flags, eval_queries, eval_out, eval_run_id, eval_threads,
                                eval_filter, eval_latency, eval_trace);
        if (sweep->parsed())
            return cmd_sweep(sweep_flags, sweep_queries, sweep_out, sweep_variant, sweep_factors,
                             sweep_ratios, sweep_seed, sweep_threads);
    } catch (const heaven::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
