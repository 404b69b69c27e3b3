#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstring>
#include <numeric>
#include <set>

#include "depmmd/common.hpp"
#include "depmmd/data.hpp"
#include "depmmd/parallel.hpp"
#include "depmmd/rng.hpp"

using namespace depmmd;

TEST_CASE("pairwise_sum equals straight accumulation on exact inputs") {
    std::vector<double> values;
    for (int i = 1; i <= 100; ++i) values.push_back(static_cast<double>(i));
    CHECK(pairwise_sum(values) == 5050.0);

    std::vector<double> powers;
    for (int i = 0; i < 30; ++i) powers.push_back(std::ldexp(1.0, -i));
    const double direct = std::accumulate(powers.begin(), powers.end(), 0.0);
    CHECK(pairwise_sum(powers) == Catch::Approx(direct).epsilon(1e-15));

    CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
    const double one[] = {3.5};
    CHECK(pairwise_sum(one) == 3.5);
}

TEST_CASE("pairwise_sum is more accurate than naive accumulation on long sums") {
    // 10^7 copies of 0.1 summed naively drift by far more than pairwise.
    std::vector<double> values(1u << 20, 0.1);
    double naive = 0.0;
    for (double v : values) naive += v;
    const double exact = 0.1 * static_cast<double>(values.size());
    CHECK(std::abs(pairwise_sum(values) - exact) < std::abs(naive - exact));
}

TEST_CASE("format_double round-trips doubles through %.17g") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, -0.0, 2.2250738585072014e-308}) {
        const std::string text = format_double(v);
        double parsed = 0.0;
        REQUIRE(parse_double(text, parsed));
        CHECK(std::memcmp(&parsed, &v, sizeof(double)) == 0);
    }
}

TEST_CASE("splitmix64 matches the published reference sequence") {
    // First three outputs for seed 0, from the reference splitmix64.c.
    SplitMix64 rng(0);
    CHECK(rng.next() == 0xE220A8397B1DCDAFull);
    CHECK(rng.next() == 0x6E789E6AA1B965F4ull);
    CHECK(rng.next() == 0x06C45D188009454Full);
}

TEST_CASE("splitmix64 uniform stays in (0, 1] and is deterministic") {
    SplitMix64 a(42), b(42);
    for (int i = 0; i < 10000; ++i) {
        const double u = a.uniform();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
        CHECK(u == b.uniform());
    }
}

TEST_CASE("uniform_below is in range and covers small supports") {
    SplitMix64 rng(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t v = rng.uniform_below(5);
        CHECK(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("normal draws have plausible first moments") {
    SplitMix64 rng(11);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.05);
}

TEST_CASE("subsample_indices returns a distinct deterministic subset") {
    const auto a = subsample_indices(100, 10, 3);
    const auto b = subsample_indices(100, 10, 3);
    REQUIRE(a.size() == 10);
    CHECK(a == b);
    std::set<Index> unique(a.begin(), a.end());
    CHECK(unique.size() == 10);
    for (Index v : a) {
        CHECK(v >= 0);
        CHECK(v < 100);
    }
    CHECK(subsample_indices(5, 10, 0).size() == 5);
    CHECK(subsample_indices(4, 4, 9) != subsample_indices(4, 4, 10));
}

TEST_CASE("parallel_for covers every index exactly once for any thread count") {
    for (int threads : {1, 2, 3, 7}) {
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) ++hits[i];
        });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    // zero-length loop: body never called
    parallel_for(0, 4, [](std::size_t, std::size_t) { FAIL("body called for empty range"); });
}

TEST_CASE("parallel_for rethrows worker exceptions") {
    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [](std::size_t begin, std::size_t) {
                                     if (begin > 0) throw SpecError("worker failure");
                                     // first chunk runs inline and succeeds
                                 }),
                    SpecError);
}

TEST_CASE("error hierarchy distinguishes recoverable and contract failures") {
    CHECK_THROWS_AS(throw FormatError("x"), Error);
    CHECK_THROWS_AS(throw ResourceError("x"), Error);
    CHECK_THROWS_AS(throw NumericError("x"), Error);
    CHECK_THROWS_AS(throw SpecError("x"), Error);
    CHECK_THROWS_AS(throw ContractViolation("x"), std::logic_error);
}
