#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "heaven/eval.hpp"

using namespace heaven;

namespace {

std::vector<PageId> pages(std::initializer_list<std::pair<int, int>> ids) {
    std::vector<PageId> out;
    for (auto [d, p] : ids) out.push_back({d, p});
    return out;
}

}  // namespace

TEST_CASE("recall_at_k examples") {
    const auto ranking = pages({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 0}});

    CHECK(recall_at_k(ranking, pages({{0, 0}}), 1) == 1.0);
    CHECK(recall_at_k(ranking, pages({{1, 0}}), 1) == 0.0);
    CHECK(recall_at_k(ranking, pages({{1, 0}}), 3) == 1.0);
    CHECK(recall_at_k(ranking, pages({{0, 0}, {2, 0}}), 3) == 0.5);
    CHECK(recall_at_k(ranking, pages({{0, 0}, {2, 0}}), 100) == 1.0);
    CHECK(recall_at_k(ranking, pages({{9, 9}}), 100) == 0.0);
    // k beyond the ranking length just truncates
    CHECK(recall_at_k(pages({{0, 0}}), pages({{0, 0}, {0, 1}}), 5) == 0.5);

    CHECK_THROWS_AS(recall_at_k(ranking, {}, 1), Error);
    CHECK_THROWS_AS(recall_at_k(ranking, pages({{0, 0}}), 0), Error);
}

TEST_CASE("recall_at_k is monotone in k and matches a set oracle") {
    std::mt19937_64 rng(400);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + int(rng() % 50);
        std::vector<PageId> ranking;
        for (int i = 0; i < n; ++i) ranking.push_back({0, i});
        std::shuffle(ranking.begin(), ranking.end(), rng);
        std::vector<PageId> gt;
        for (int i = 0; i < n; ++i)
            if (rng() % 3 == 0) gt.push_back({0, i});
        if (gt.empty()) gt.push_back({0, 0});

        double prev = 0.0;
        for (int k = 1; k <= n + 3; ++k) {
            const double r = recall_at_k(ranking, gt, k);
            CHECK(r >= prev);
            // independent count
            int hits = 0;
            for (int i = 0; i < std::min<int>(k, n); ++i)
                for (const auto& g : gt)
                    if (ranking[i] == g) ++hits;
            CHECK(r == double(hits) / double(gt.size()));
            prev = r;
        }
        CHECK(recall_at_k(ranking, gt, n) == 1.0);
    }
}

TEST_CASE("doc_level_scores takes the max over pages") {
    std::vector<DocumentMeta> docs = {{"a", 2, 0}, {"b", 2, 2}, {"c", 1, 4}};
    std::vector<RankedPage> ranking = {
        {{1, 0}, true, 9.0}, {{0, 0}, true, 7.0}, {{0, 1}, true, 8.5},
        {{2, 0}, true, 8.5}, {{1, 1}, true, 1.0},
    };
    const auto scores = doc_level_scores(ranking, docs);
    REQUIRE(scores.size() == 3);
    CHECK(scores[0].doc_index == 1);
    CHECK(scores[0].score == 9.0);
    // tie at 8.5: doc 0's best page appears earlier in the ranking
    CHECK(scores[1].doc_index == 0);
    CHECK(scores[2].doc_index == 2);

    SECTION("unscored pages lose to any scored page") {
        std::vector<RankedPage> mixed = {{{0, 0}, false, 0.0}, {{1, 0}, true, -100.0}};
        const auto s = doc_level_scores(mixed, docs);
        CHECK(s[0].doc_index == 1);
    }
    SECTION("unknown document is rejected") {
        std::vector<RankedPage> bad = {{{7, 0}, true, 1.0}};
        CHECK_THROWS_AS(doc_level_scores(bad, docs), Error);
    }
}

TEST_CASE("heuristic query filter") {
    auto q = [](std::string text, bool with_gt = true) {
        QueryRecord r;
        r.text = std::move(text);
        if (with_gt) r.ground_truth = {{0, 0}};
        return r;
    };
    const std::vector<QueryRecord> queries = {
        q("what does table 3 show"),                  // removed
        q("what is shown in Figure 12"),              // removed
        q("see fig. iv for the trend"),               // removed (roman numeral)
        q("how many tables are in the room"),         // kept: no number follows
        q("what figure of speech is used"),           // kept
        q("total revenue in 2019"),                   // kept
        q("unanswerable", /*with_gt=*/false),         // removed: empty gt
        q("compare Table 2 and Table 3"),             // removed
    };
    const auto res = heuristic_query_filter(queries);
    CHECK(res.kept == std::vector<std::size_t>{3, 4, 5});
    CHECK(res.removed == std::vector<std::size_t>{0, 1, 2, 6, 7});
}

TEST_CASE("report emission") {
    const auto dir = std::filesystem::temp_directory_path() / "heaven_test_eval";
    std::filesystem::create_directories(dir);

    EvalRow row;
    row.run_id = "run1";
    row.query_count = 10;
    row.recall_at_1 = 0.5;
    row.recall_at_3 = 2.0 / 3.0;
    row.flops_total_B = 1.234567;

    SECTION("line format") {
        CHECK(report_line(row) ==
              "run1,15,0.500000,0.250000,200,0.100000,0.300000,10,"
              "0.500000,0.666667,0.000000,0.000000,1.234567,0.000000");
    }
    SECTION("emit, parse back, emit again byte-identically") {
        EvalRow row2 = row;
        row2.run_id = "run2";
        row2.alpha = 0.4;
        emit_report({row, row2}, dir / "a.csv");
        const auto parsed = parse_report(dir / "a.csv");
        REQUIRE(parsed.size() == 2);
        CHECK(parsed[0].run_id == "run1");
        CHECK(parsed[1].alpha == 0.4);
        emit_report(parsed, dir / "b.csv");

        std::ifstream fa(dir / "a.csv"), fb(dir / "b.csv");
        std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
        CHECK(sa.substr(0, sa.find('\n')) == kReportHeader);
    }
    SECTION("empty report still carries the header") {
        emit_report({}, dir / "empty.csv");
        CHECK(parse_report(dir / "empty.csv").empty());
    }
    SECTION("header mismatch is rejected") {
        std::ofstream(dir / "bad.csv") << "nope\n";
        CHECK_THROWS_AS(parse_report(dir / "bad.csv"), Error);
    }
}
