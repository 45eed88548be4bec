#include <catch2/catch_amalgamated.hpp>

#include "heaven/scoring.hpp"
#include "support/synthetic.hpp"

using namespace heaven;

TEST_CASE("dot_score basics") {
    PooledVector a{{1, 2}}, b{{3, 4}};
    CHECK(dot_score(a, b) == 11.0);

    PooledVector zero{{0, 0}};
    CHECK(dot_score(a, zero) == 0.0);

    PooledVector c{{1, 2, 3}};
    CHECK_THROWS_AS(dot_score(a, c), Error);

    std::uint64_t flops = 0;
    dot_score(a, b, &flops);
    CHECK(flops == 4);  // 2d
}

TEST_CASE("dot_score matches double-precision oracle on random pairs") {
    synth::Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const auto a = synth::random_pooled(rng, 64);
        const auto b = synth::random_pooled(rng, 64);
        const double ref = synth::oracle_dot(a, b);
        CHECK(std::abs(dot_score(a, b) - ref) <= 1e-5 * (1.0 + std::abs(ref)));
    }
}

TEST_CASE("maxsim_score examples") {
    EmbeddingMatrix q1{1, 2, {1, 0}};
    EmbeddingMatrix p1{2, 2, {1, 0, 0, 1}};
    CHECK(maxsim_score(q1, p1) == 1.0);

    EmbeddingMatrix q2{2, 2, {1, 0, 0, 1}};
    EmbeddingMatrix p2{2, 2, {2, 0, 0, 3}};
    CHECK(maxsim_score(q2, p2) == 5.0);

    EmbeddingMatrix qz{2, 2, {0, 0, 0, 0}};
    EmbeddingMatrix pz{2, 2, {0, 0, 5, -5}};
    CHECK(maxsim_score(qz, pz) == 0.0);

    EmbeddingMatrix bad{1, 3, {1, 2, 3}};
    CHECK_THROWS_AS(maxsim_score(q1, bad), Error);

    std::uint64_t flops = 0;
    maxsim_score(q2, p2, &flops);
    // n_q*n_p*2d + n_q*(n_p-1) = 2*2*4 + 2*1
    CHECK(flops == 18);
}

TEST_CASE("maxsim matches triple-loop oracle") {
    synth::Rng rng(11);
    std::uniform_int_distribution<std::int64_t> rows(1, 8), dim(1, 8);
    for (int i = 0; i < 300; ++i) {
        const std::int64_t d = dim(rng);
        const auto q = synth::random_matrix(rng, rows(rng), d);
        const auto p = synth::random_matrix(rng, rows(rng), d);
        CHECK(std::abs(maxsim_score(q, p) - synth::oracle_maxsim(q, p)) <= 1e-6);
    }
}

TEST_CASE("maxsim row monotonicity") {
    synth::Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        const std::int64_t d = 4;
        const auto q = synth::random_matrix(rng, 3, d);
        auto p = synth::random_matrix(rng, 4, d);
        const double base = maxsim_score(q, p);

        // appending a page row never decreases the score
        auto extra = synth::random_matrix(rng, 1, d);
        EmbeddingMatrix p2 = p;
        p2.rows += 1;
        p2.data.insert(p2.data.end(), extra.data.begin(), extra.data.end());
        CHECK(maxsim_score(q, p2) >= base - 1e-12);

        // appending a query row adds exactly that row's max inner product
        EmbeddingMatrix q2 = q;
        q2.rows += 1;
        q2.data.insert(q2.data.end(), extra.data.begin(), extra.data.end());
        CHECK(maxsim_score(q2, p) ==
              Catch::Approx(base + synth::oracle_maxsim(extra, p)).margin(1e-9));
    }
}

TEST_CASE("masked maxsim") {
    EmbeddingMatrix q{2, 2, {1, 0, 9, 9}};
    EmbeddingMatrix p{1, 2, {1, 0}};
    CHECK(masked_maxsim_score(q, {true, false}, p) == 1.0);

    SECTION("all-true mask is bit-identical to the unmasked path") {
        synth::Rng rng(13);
        for (int i = 0; i < 100; ++i) {
            const auto qq = synth::random_matrix(rng, 4, 6);
            const auto pp = synth::random_matrix(rng, 5, 6);
            CHECK(masked_maxsim_score(qq, std::vector<bool>(4, true), pp) ==
                  maxsim_score(qq, pp));
        }
    }
    SECTION("equals oracle on the masked submatrix") {
        synth::Rng rng(14);
        std::bernoulli_distribution coin(0.5);
        for (int i = 0; i < 200; ++i) {
            const auto qq = synth::random_matrix(rng, 5, 4);
            const auto pp = synth::random_matrix(rng, 6, 4);
            std::vector<bool> mask(5);
            bool any = false;
            for (auto&& m : mask) {
                m = coin(rng);
                any = any || m;
            }
            if (!any) mask[2] = true;
            CHECK(std::abs(masked_maxsim_score(qq, mask, pp) -
                           synth::oracle_maxsim(qq, pp, &mask)) <= 1e-9);
        }
    }
    SECTION("all-false mask is a degenerate-mask error") {
        try {
            masked_maxsim_score(q, {false, false}, p);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::degenerate_mask);
        }
    }
    SECTION("flops scale with the number of active rows") {
        std::uint64_t full = 0, half = 0;
        EmbeddingMatrix qq{2, 2, {1, 0, 0, 1}};
        EmbeddingMatrix pp{3, 2, {1, 0, 0, 1, 1, 1}};
        masked_maxsim_score(qq, {true, true}, pp, &full);
        masked_maxsim_score(qq, {true, false}, pp, &half);
        CHECK(half * 2 == full);
    }
}

TEST_CASE("fuse") {
    CHECK(fuse(2, 4, 0.1) == Catch::Approx(3.8));
    CHECK(fuse(7, 9, 0.0) == 9.0);
    CHECK(fuse(7, 9, 1.0) == 7.0);
    CHECK_THROWS_AS(fuse(1, 2, 1.5), Error);
    CHECK_THROWS_AS(fuse(1, 2, -0.1), Error);

    std::uint64_t flops = 0;
    fuse(1, 2, 0.5, &flops);
    CHECK(flops == 3);

    synth::Rng rng(15);
    std::uniform_real_distribution<double> dist(-5, 5);
    for (int i = 0; i < 200; ++i) {
        const double a = dist(rng), b = dist(rng), w = 0.3;
        CHECK(fuse(a + 1.0, b, w) >= fuse(a, b, w));
        CHECK(fuse(a, b + 1.0, w) >= fuse(a, b, w));
    }
}

TEST_CASE("top_k and top_fraction") {
    using Item = Scored<PageId>;
    std::vector<Item> items = {{{0, 0}, 3.0}, {{0, 1}, 1.0}, {{0, 2}, 2.0}};

    auto top2 = top_k(items, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0].score == 3.0);
    CHECK(top2[1].score == 2.0);

    CHECK(top_k(items, 10).size() == 3);
    CHECK_THROWS_AS(top_k(items, 0), Error);
    CHECK_THROWS_AS(top_k(std::vector<Item>{}, 1), Error);

    CHECK(top_fraction(items, 1.0).size() == 3);
    CHECK_THROWS_AS(top_fraction(items, 0.0), Error);
    CHECK_THROWS_AS(top_fraction(items, 1.5), Error);

    SECTION("ten items at p = 0.5 keeps the five largest") {
        std::vector<Item> ten;
        for (int i = 0; i < 10; ++i) ten.push_back({{0, i}, double(i)});
        auto half = top_fraction(ten, 0.5);
        REQUIRE(half.size() == 5);
        CHECK(half.front().score == 9.0);
        CHECK(half.back().score == 5.0);
    }

    SECTION("matches full-sort-then-prefix oracle on random lists") {
        synth::Rng rng(16);
        std::uniform_real_distribution<double> score(-10, 10);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<Item> list;
            const int n = 1 + int(rng() % 40);
            for (int i = 0; i < n; ++i)
                list.push_back({{int(rng() % 4), i}, score(rng)});
            auto sorted = list;
            std::sort(sorted.begin(), sorted.end(), ranks_before<PageId>);

            const int k = 1 + int(rng() % n);
            auto got = top_k(list, k);
            REQUIRE(got == std::vector<Item>(sorted.begin(), sorted.begin() + k));

            const double p = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
            auto frac = top_fraction(list, p);
            REQUIRE(frac == std::vector<Item>(sorted.begin(),
                                              sorted.begin() + ceil_fraction(n, p)));
        }
    }

    SECTION("top_fraction prefix property") {
        synth::Rng rng(17);
        std::uniform_real_distribution<double> score(-10, 10);
        std::vector<Item> list;
        for (int i = 0; i < 37; ++i) list.push_back({{0, i}, score(rng)});
        for (double p = 0.1; p < 1.0; p += 0.17) {
            auto small = top_fraction(list, p);
            auto big = top_fraction(list, std::min(1.0, p + 0.2));
            REQUIRE(small.size() <= big.size());
            CHECK(std::equal(small.begin(), small.end(), big.begin()));
        }
    }

    SECTION("ties break by doc then page index") {
        std::vector<Item> tied = {{{1, 0}, 2.0}, {{0, 5}, 2.0}, {{0, 2}, 2.0}};
        auto sorted = top_k(tied, 3);
        CHECK(sorted[0].id == PageId{0, 2});
        CHECK(sorted[1].id == PageId{0, 5});
        CHECK(sorted[2].id == PageId{1, 0});
    }
}
