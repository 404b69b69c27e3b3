#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "depmmd/analysis.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

using namespace depmmd;

namespace {

// One 4-row dataset summarized by itself with exact dyadic weights, so every
// witness value cancels exactly.
struct SelfSummary {
    testing_support::Instance inst;
    Vector weights;
    SelfSummary()
        : inst(testing_support::make_instance(401, {.n_datasets = 1,
                                                    .min_rows = 4,
                                                    .max_rows = 4,
                                                    .dim = 2})),
          weights(Vector::Constant(4, 0.25)) {
        inst.ws.support = {0, 1, 2, 3};
        inst.ws.weights["d0"] = weights;
        for (Index s : inst.ws.support)
            inst.support_rows.push_back(
                inst.cache.candidate_rows[static_cast<std::size_t>(s)]);
    }
};

WeightedSupport two_label_support(std::initializer_list<double> a, std::initializer_list<double> b) {
    WeightedSupport ws;
    const Index m = static_cast<Index>(a.size());
    for (Index i = 0; i < m; ++i) ws.support.push_back(i);
    Vector wa(m), wb(m);
    Index i = 0;
    for (double v : a) wa(i++) = v;
    i = 0;
    for (double v : b) wb(i++) = v;
    ws.weights["a"] = wa;
    ws.weights["b"] = wb;
    return ws;
}

std::vector<std::string> numbered_ids(Index m, const std::string& prefix) {
    std::vector<std::string> ids;
    for (Index i = 0; i < m; ++i) ids.push_back(prefix + std::to_string(i));
    return ids;
}

}  // namespace

TEST_CASE("criticisms of an exact self summary fall back to row order") {
    SelfSummary s;
    const CriticismSet crit = criticisms(s.inst.table, s.inst.collection, s.inst.kernel, "d0",
                                         s.inst.support_rows, s.weights, 2);
    REQUIRE(crit.ranked.size() == 2);
    CHECK(crit.ranked[0].first == "d0#0");
    CHECK(crit.ranked[1].first == "d0#1");
    CHECK(crit.ranked[0].second == 0.0);
    CHECK(crit.ranked[1].second == 0.0);
}

TEST_CASE("a planted outlier is the first criticism") {
    EmbeddingTable table;
    Vector p(1);
    const auto add = [&](const std::string& id, double x) {
        p << x;
        return table.add_row(id, p);
    };
    std::vector<Index> rows = {add("hub", 0.0), add("near1", 0.1), add("near2", -0.1),
                               add("far", 5.0)};
    table.finalize();
    DatasetCollection coll;
    coll.add_dataset("t", rows);
    coll.candidates = coll.pooled_rows();
    const KernelModel kernel = build_additive_kernel(table, coll);

    const CriticismSet crit =
        criticisms(table, coll, kernel, "t", {rows[0]}, Vector::Ones(1), 4);
    REQUIRE(crit.ranked.size() == 4);
    CHECK(crit.ranked[0].first == "far");
    CHECK(crit.ranked[0].second > 0.0);
    // the summary atom is over-represented: its witness is negative, and it
    // trails the outlier (hub vs near ordering depends on the bandwidth)
    for (const auto& [id, value] : crit.ranked)
        if (id == "hub") CHECK(value < 0.0);
}

TEST_CASE("criticisms sort the whole dataset consistently with direct witness values") {
    testing_support::Instance inst = testing_support::make_instance(
        409, {.n_datasets = 2, .min_rows = 8, .max_rows = 15, .dim = 3, .support_size = 3});
    for (const auto& label : inst.collection.labels) {
        const auto& rows = inst.collection.dataset(label);
        const Index n = static_cast<Index>(rows.size());
        const Vector& w = inst.ws.weights_of(label);
        const CriticismSet crit =
            criticisms(inst.table, inst.collection, inst.kernel, label, inst.support_rows, w, n);
        REQUIRE(static_cast<Index>(crit.ranked.size()) == n);

        for (std::size_t r = 1; r < crit.ranked.size(); ++r)
            CHECK(crit.ranked[r - 1].second >= crit.ranked[r].second);

        std::map<std::string, double> direct;
        for (Index i : rows)
            direct[inst.table.ids[static_cast<std::size_t>(i)]] =
                oracle::witness_direct(inst.table, inst.kernel, rows, inst.support_rows, w,
                                       inst.table.points.row(i));
        for (const auto& [id, value] : crit.ranked)
            CHECK(value == Catch::Approx(direct.at(id)).margin(1e-12));

        // thread count never changes the ranking
        const CriticismSet four = criticisms(inst.table, inst.collection, inst.kernel, label,
                                             inst.support_rows, w, n, 4);
        CHECK(four.ranked == crit.ranked);
    }
}

TEST_CASE("criticism count bounds") {
    SelfSummary s;
    CHECK_THROWS_AS(criticisms(s.inst.table, s.inst.collection, s.inst.kernel, "d0",
                               s.inst.support_rows, s.weights, 0),
                    ContractViolation);
    CHECK_THROWS_AS(criticisms(s.inst.table, s.inst.collection, s.inst.kernel, "d0",
                               s.inst.support_rows, s.weights, 5),
                    ContractViolation);
    CHECK_THROWS_AS(criticisms(s.inst.table, s.inst.collection, s.inst.kernel, "missing",
                               s.inst.support_rows, s.weights, 1),
                    ContractViolation);
}

TEST_CASE("weight ratios on the worked two-atom example") {
    const WeightedSupport ws = two_label_support({0.8, 0.2}, {0.2, 0.8});
    const RatioReport report = weight_ratio(ws, numbered_ids(2, "e"), "a", "b", 2.0, 0.5);
    REQUIRE(report.entries.size() == 2);
    CHECK(report.entries[0].f == Catch::Approx(0.25).margin(1e-15));
    CHECK(report.entries[1].f == Catch::Approx(4.0).margin(1e-15));
    CHECK(report.entries[0].flag == RatioFlag::finite);
    CHECK(report.over_in_a == std::vector<Index>{0});
    CHECK(report.over_in_b == std::vector<Index>{1});
    CHECK(report.balanced.empty());
    CHECK(ratio_partition_name(report, 0) == "over_in_a");
    CHECK(ratio_partition_name(report, 1) == "over_in_b");
}

TEST_CASE("mass present only in one dataset is flagged, mass in neither is dropped") {
    const WeightedSupport ws = two_label_support({1.0, 0.0, 0.0}, {0.5, 0.5, 0.0});
    const RatioReport report = weight_ratio(ws, numbered_ids(3, "e"), "a", "b", 2.0, 0.5);
    REQUIRE(report.entries.size() == 2);  // atom 2 carries nothing anywhere

    CHECK(report.entries[0].position == 0);
    CHECK(report.entries[0].f == Catch::Approx(0.5).margin(1e-15));

    CHECK(report.entries[1].position == 1);
    CHECK(std::isinf(report.entries[1].f));
    CHECK(report.entries[1].flag == RatioFlag::zero_denominator);
    CHECK(ratio_flag_name(report.entries[1].flag) == "zero_denominator");
    CHECK(report.over_in_b == std::vector<Index>{1});
    CHECK(report.balanced == std::vector<Index>{0});
}

TEST_CASE("swapping the ratio direction inverts every finite ratio") {
    SplitMix64 rng(411);
    WeightedSupport ws;
    const Index m = 6;
    for (Index i = 0; i < m; ++i) ws.support.push_back(i);
    ws.weights["a"] = testing_support::random_simplex_point(rng, m);
    ws.weights["b"] = testing_support::random_simplex_point(rng, m);
    const auto ids = numbered_ids(m, "x");

    const RatioReport ab = weight_ratio(ws, ids, "a", "b", 2.0, 0.5);
    const RatioReport ba = weight_ratio(ws, ids, "b", "a", 2.0, 0.5);
    REQUIRE(ab.entries.size() == ba.entries.size());
    for (std::size_t i = 0; i < ab.entries.size(); ++i) {
        CHECK(ab.entries[i].f == Catch::Approx(1.0 / ba.entries[i].f).epsilon(1e-12));
        CHECK(ab.entries[i].w_a == ba.entries[i].w_b);
    }
}

TEST_CASE("ratio thresholds are validated") {
    const WeightedSupport ws = two_label_support({0.5, 0.5}, {0.5, 0.5});
    const auto ids = numbered_ids(2, "e");
    CHECK_THROWS_AS(weight_ratio(ws, ids, "a", "b", 0.5, 2.0), SpecError);
    CHECK_THROWS_AS(weight_ratio(ws, ids, "a", "b", 2.0, 0.0), SpecError);
    CHECK_THROWS_AS(weight_ratio(ws, ids, "a", "b", 2.0, -1.0), SpecError);
    CHECK_THROWS_AS(weight_ratio(ws, ids, "a", "b", 2.0, 2.0), SpecError);
    CHECK_THROWS_AS(weight_ratio(ws, numbered_ids(3, "e"), "a", "b", 2.0, 0.5),
                    ContractViolation);
}

TEST_CASE("grouped weights add up by attribute value") {
    WeightedSupport ws;
    ws.support = {0, 1, 2};
    ws.weights["t"] = (Vector(3) << 0.25, 0.25, 0.5).finished();
    const auto ids = numbered_ids(3, "g");
    AttributeTable attrs;
    attrs.set("g0", "genre", "A");
    attrs.set("g1", "genre", "A");
    attrs.set("g2", "genre", "B");

    const auto grouped = grouped_weights(ws, ids, attrs, "genre");
    REQUIRE(grouped.count("t") == 1);
    CHECK(grouped.at("t").at("A") == 0.5);
    CHECK(grouped.at("t").at("B") == 0.5);
}

TEST_CASE("grouped weights conserve mass and match the direct oracle") {
    SplitMix64 rng(413);
    WeightedSupport ws;
    const Index m = 8;
    std::vector<std::string> groups;
    AttributeTable attrs;
    const auto ids = numbered_ids(m, "r");
    for (Index i = 0; i < m; ++i) {
        ws.support.push_back(i);
        const std::string g = "g" + std::to_string(rng.uniform_below(3));
        groups.push_back(g);
        attrs.set(ids[static_cast<std::size_t>(i)], "cat", g);
    }
    ws.weights["a"] = testing_support::random_simplex_point(rng, m);
    ws.weights["b"] = testing_support::random_simplex_point(rng, m);

    const auto grouped = grouped_weights(ws, ids, attrs, "cat");
    const auto direct = oracle::grouped_direct(ws, groups);
    for (const auto& [label, row] : grouped) {
        double total = 0.0;
        for (const auto& [group, sum] : row) {
            CHECK(sum == Catch::Approx(direct.at(label).at(group)).margin(1e-15));
            total += sum;
        }
        CHECK(total == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("grouped weights name the row missing its attribute") {
    WeightedSupport ws;
    ws.support = {0, 1};
    ws.weights["t"] = (Vector(2) << 0.5, 0.5).finished();
    AttributeTable attrs;
    attrs.set("r0", "genre", "A");
    try {
        grouped_weights(ws, numbered_ids(2, "r"), attrs, "genre");
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("r1") != std::string::npos);
        CHECK(std::string(e.what()).find("genre") != std::string::npos);
    }
}

TEST_CASE("weighted moments on hand-checkable values") {
    WeightedSupport ws;
    ws.support = {0, 1};
    ws.weights["t"] = (Vector(2) << 0.5, 0.5).finished();
    AttributeTable attrs;
    attrs.set("y0", "year", "1990");
    attrs.set("y1", "year", "2000");

    const auto moments = weighted_attribute_moments(ws, numbered_ids(2, "y"), attrs, "year");
    CHECK(moments.at("t").mean == 1995.0);
    CHECK(moments.at("t").sd == 5.0);

    // a one-atom summary has zero spread
    WeightedSupport solo;
    solo.support = {0};
    solo.weights["t"] = Vector::Ones(1);
    AttributeTable one;
    one.set("y0", "year", "1987");
    const auto m1 = weighted_attribute_moments(solo, numbered_ids(1, "y"), one, "year");
    CHECK(m1.at("t").mean == 1987.0);
    CHECK(m1.at("t").sd == 0.0);
}

TEST_CASE("weighted moments match the direct oracle and reject non-numeric values") {
    SplitMix64 rng(417);
    WeightedSupport ws;
    const Index m = 7;
    AttributeTable attrs;
    Vector values(m);
    const auto ids = numbered_ids(m, "v");
    for (Index i = 0; i < m; ++i) {
        ws.support.push_back(i);
        values(i) = 1900.0 + rng.uniform_below(120);
        attrs.set(ids[static_cast<std::size_t>(i)], "year", format_double(values(i)));
    }
    ws.weights["a"] = testing_support::random_simplex_point(rng, m);
    ws.weights["b"] = testing_support::random_simplex_point(rng, m);

    const auto moments = weighted_attribute_moments(ws, ids, attrs, "year");
    for (const auto& [label, w] : ws.weights) {
        const auto [mean, sd] = oracle::moments_direct(w, values);
        CHECK(moments.at(label).mean == Catch::Approx(mean).margin(1e-12));
        CHECK(moments.at(label).sd == Catch::Approx(sd).margin(1e-12));
    }

    attrs.set(ids[0], "year", "nineteen-ninety");
    CHECK_THROWS_AS(weighted_attribute_moments(ws, ids, attrs, "year"), FormatError);
    CHECK_THROWS_AS(weighted_attribute_moments(ws, ids, attrs, "absent"), SpecError);
}

TEST_CASE("analysis writers emit the documented headers and rows") {
    std::ostringstream crit_os;
    CriticismSet set;
    set.label = "t";
    set.ranked = {{"far", 0.25}, {"near", -0.5}};
    write_criticisms_csv(crit_os, {set});
    CHECK(crit_os.str() == "dataset,rank,row_id,witness\n"
                           "t,1,far,0.25\n"
                           "t,2,near,-0.5\n");

    std::ostringstream ratio_os;
    const WeightedSupport ws = two_label_support({0.8, 0.0}, {0.2, 0.2});
    const RatioReport report = weight_ratio(ws, {"e0", "e1"}, "a", "b", 2.0, 0.5);
    write_ratios_csv(ratio_os, {report});
    CHECK(ratio_os.str() == "label_a,label_b,exemplar_id,w_a,w_b,f,flag,partition\n"
                            "a,b,e0,0.80000000000000004,0.20000000000000001,0.25,finite,over_in_a\n"
                            "a,b,e1,0,0.20000000000000001,inf,zero_denominator,over_in_b\n");

    std::ostringstream grouped_os;
    std::map<std::string, std::map<std::string, double>> grouped;
    grouped["t"]["A"] = 0.5;
    grouped["t"]["B"] = 0.5;
    write_grouped_csv(grouped_os, grouped, "genre");
    CHECK(grouped_os.str() == "dataset,attribute,group,weight_sum\n"
                              "t,genre,A,0.5\n"
                              "t,genre,B,0.5\n");

    std::ostringstream moments_os;
    std::map<std::string, Moments> per_label;
    per_label["t"] = {1995.0, 5.0};
    write_moments_csv(moments_os, {{"year", per_label}});
    CHECK(moments_os.str() == "dataset,attribute,mean,sd\n"
                              "t,year,1995,5\n");
}
