#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairtree/core_model.hpp"
#include "fairtree/synth.hpp"
#include "fairtree/table.hpp"

using namespace fairtree;

namespace {

const auto kAll = [](std::size_t) { return true; };

// y, m1, m2, group rows; group 0 = a1.
ObservationTable hand_table(const std::vector<std::array<int, 4>>& rows) {
    ObservationTable t;
    t.group_levels = {"a1", "a2"};
    for (const auto& r : rows) {
        t.outcome.push_back(static_cast<std::uint8_t>(r[0]));
        t.yhat1.push_back(static_cast<std::uint8_t>(r[1]));
        t.yhat2.push_back(static_cast<std::uint8_t>(r[2]));
        t.group.push_back(r[3]);
    }
    return t;
}

synth::Scenario one_cell(double d, std::int64_t n, std::uint64_t seed) {
    synth::Scenario s;
    s.n = n;
    s.seed = seed;
    s.covariates = {{"x", CovariateKind::Categorical, {"p", "q"}, {}, 0, 0}};
    s.cells = {synth::CellSpec{{}, {0.10, 0.10}, {0.10 + d, 0.10}}};
    return s;
}

synth::Scenario three_cells(std::uint64_t seed) {
    synth::Scenario s;
    s.n = 5000;
    s.seed = seed;
    s.prevalence_a1 = 0.4;
    s.prevalence_a2 = 0.6;
    s.covariates = {{"sex", CovariateKind::Categorical, {"f", "m"}, {0.3, 0.7}, 0, 0},
                    {"band", CovariateKind::Ordinal, {"lo", "mid", "hi"}, {}, 0, 0},
                    {"z", CovariateKind::Numeric, {}, {}, -1.0, 1.0}};
    synth::CellSpec a, b, c;
    a.where = {{"sex", {"f"}}};
    a.a1 = {0.05, 0.10};
    a.a2 = {0.20, 0.05};
    b.where = {{"sex", {"m"}}, {"band", {"lo"}}};
    b.a1 = {0.15, 0.15};
    b.a2 = {0.10, 0.25};
    c.where = {{"sex", {"m"}}, {"band", {"mid", "hi"}}};
    c.a1 = c.a2 = {0.10, 0.10};
    s.cells = {a, b, c};
    return s;
}

}  // namespace

TEST_CASE("oracle_delta on a hand-counted table") {
    // FPR conditions on y = 0. Among y = 0:
    //   a1: m1 positive 1/4, m2 positive 2/4
    //   a2: m1 positive 1/4, m2 positive 3/4
    // delta = (3/4 - 2/4) - (1/4 - 1/4) = 0.25
    const auto t = hand_table({{0, 1, 1, 0}, {0, 0, 1, 0}, {0, 0, 0, 0}, {0, 0, 0, 0},
                               {0, 1, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 0, 1},
                               {1, 0, 0, 0}, {1, 1, 0, 0}, {1, 0, 0, 1}, {1, 1, 1, 1}});
    CHECK(synth::oracle_delta(t, Metric::FPR, 0, 1, kAll) == doctest::Approx(0.25));
    // FNR conditions on y = 1 and counts negative calls:
    //   a1: m1 negative 1/2, m2 negative 2/2; a2: m1 negative 1/2, m2 negative 1/2
    // delta = (1/2 - 1) - (1/2 - 1/2) = -0.5
    CHECK(synth::oracle_delta(t, Metric::FNR, 0, 1, kAll) == doctest::Approx(-0.5));
    // Acceptance uses all six rows per group:
    //   a1: m1 2/6, m2 2/6; a2: m1 2/6, m2 4/6
    CHECK(synth::oracle_delta(t, Metric::Accept, 0, 1, kAll) == doctest::Approx(1.0 / 3));
    CHECK(synth::oracle_delta(t, Metric::FPR, 1, 0, kAll) == doctest::Approx(-0.25));

    const auto only_a1 = [&](std::size_t r) { return t.group[r] == 0; };
    CHECK_THROWS_AS(synth::oracle_delta(t, Metric::FPR, 0, 1, only_a1), std::domain_error);
}

TEST_CASE("identical models give zero and swapping groups negates") {
    auto t = synth::generate(three_cells(2));
    const auto swapped = swap_groups(t);
    for (auto m : {Metric::FPR, Metric::FNR, Metric::Accept}) {
        const double d = synth::oracle_delta(t, m, 0, 1, kAll);
        CHECK(synth::oracle_delta(swapped, m, 0, 1, kAll) == doctest::Approx(-d).epsilon(1e-12));
    }
    t.yhat2 = t.yhat1;
    for (auto m : {Metric::FPR, Metric::FNR, Metric::Accept}) CHECK(synth::oracle_delta(t, m, 0, 1, kAll) == 0.0);
}

TEST_CASE("planted delta is recovered at large n") {
    const auto t = synth::generate(one_cell(0.05, 100000, 11));
    CHECK(std::abs(synth::oracle_delta(t, Metric::FPR, 0, 1, kAll) - 0.05) < 0.01);
    CHECK(std::abs(synth::oracle_delta(t, Metric::Accept, 0, 1, kAll) - 0.05) < 0.01);
    CHECK(std::abs(synth::oracle_delta(t, Metric::FNR, 0, 1, kAll) + 0.05) < 0.01);
    CHECK(synth::cell_delta(one_cell(0.05, 1, 1).cells[0], Metric::FNR) == doctest::Approx(-0.05));
}

TEST_CASE("generation is deterministic per seed") {
    const auto a = synth::table_delimited(synth::generate(three_cells(8)));
    const auto b = synth::table_delimited(synth::generate(three_cells(8)));
    const auto c = synth::table_delimited(synth::generate(three_cells(9)));
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a.rfind("y,m1,m2,group,sex,band,z\n", 0) == 0);
    CHECK(synth::split_seed(1, 0) != synth::split_seed(1, 1));
    CHECK(synth::split_seed(1, 0) == synth::split_seed(1, 0));
}

TEST_CASE("scenario validation") {
    auto s = three_cells(1);
    CHECK_NOTHROW(s.validate());

    auto gap = s;
    gap.cells.pop_back();  // males in mid/hi are uncovered
    CHECK_THROWS_AS(gap.validate(), std::invalid_argument);

    auto overlap = s;
    overlap.cells[1].where["band"] = {"lo", "mid"};
    CHECK_THROWS_AS(overlap.validate(), std::invalid_argument);

    auto bad_prob = s;
    bad_prob.cells[0].a2 = {0.7, 0.4};
    CHECK_THROWS_AS(bad_prob.validate(), std::invalid_argument);

    auto numeric_cell = s;
    numeric_cell.cells[0].where["z"] = {"0"};
    CHECK_THROWS_AS(numeric_cell.validate(), std::invalid_argument);

    auto unknown_level = s;
    unknown_level.cells[0].where["sex"] = {"x"};
    CHECK_THROWS_AS(unknown_level.validate(), std::invalid_argument);

    auto probs = s;
    probs.covariates[0].probs = {0.5, 0.6};
    CHECK_THROWS_AS(probs.validate(), std::invalid_argument);
}

TEST_CASE("model pipeline equals the oracle in every cell") {
    const auto s = three_cells(21);
    const auto t = synth::generate(s);
    const auto cells = synth::generated_cells(s, t);
    REQUIRE(cells.size() == t.size());
    for (auto m : {Metric::FPR, Metric::FNR, Metric::Accept}) {
        const auto records = labeled_records(t, m);
        for (std::size_t c = 0; c < s.cells.size(); ++c) {
            std::vector<std::size_t> rows;
            for (std::size_t r = 0; r < t.size(); ++r)
                if (cells[r] == c) rows.push_back(r);
            const double pipeline = delta_hat(mle(count_cells(condition_sample(records, rows, m))));
            const double oracle = synth::oracle_delta(t, m, 0, 1, [&](std::size_t r) { return cells[r] == c; });
            CHECK(std::abs(pipeline - oracle) <= 1e-12);
            CHECK(std::abs(oracle - synth::cell_delta(s.cells[c], m)) < 0.12);
        }
    }
}

TEST_CASE("generated_cells agrees with the covariate values") {
    const auto s = three_cells(4);
    const auto t = synth::generate(s);
    const auto cells = synth::generated_cells(s, t);
    const auto& sex = t.covariates.at(0);
    const auto& band = t.covariates.at(1);
    for (std::size_t r = 0; r < t.size(); ++r) {
        const std::size_t expect = sex.codes[r] == 0 ? 0 : band.codes[r] == 0 ? 1 : 2;
        CHECK(cells[r] == expect);
    }
    const auto& z = t.covariates.at(2);
    for (double v : z.values) CHECK((v >= -1.0 && v < 1.0));
}

TEST_CASE("scenario JSON round trip") {
    const auto s = three_cells(77);
    const auto j = synth::scenario_to_json(s);
    const auto back = synth::scenario_from_json(nlohmann::json::parse(j.dump()));
    CHECK(synth::scenario_to_json(back).dump() == j.dump());
    CHECK(synth::table_delimited(synth::generate(back)) == synth::table_delimited(synth::generate(s)));
    auto extra = nlohmann::json::parse(j.dump());
    extra["sead"] = 3;
    CHECK_THROWS_AS(synth::scenario_from_json(extra), std::invalid_argument);
}

TEST_CASE("ks_uniform") {
    CHECK(synth::ks_uniform({0.5}) == doctest::Approx(0.5));
    std::vector<double> grid;
    for (int i = 0; i < 100; ++i) grid.push_back((i + 0.5) / 100);
    CHECK(synth::ks_uniform(grid) == doctest::Approx(0.005));
}
