#include <doctest.h>

#include <cmath>

#include "kneescout/error.hpp"
#include "kneescout/report.hpp"
#include "kneescout/synthgen.hpp"
#include "support.hpp"

using namespace kneescout;
using support::code_of;

TEST_SUITE("report") {

TEST_CASE("pearson hand cases") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> up(5), down(5);
    for (std::size_t i = 0; i < 5; ++i) {
        up[i] = 2 * x[i] + 3;
        down[i] = -x[i];
    }
    CHECK(pearson(x, up) == doctest::Approx(1.0));
    CHECK(pearson(x, down) == doctest::Approx(-1.0));
    const std::vector<double> a = {1, 2, 3}, b = {1, 3, 2};
    CHECK(pearson(a, b) == doctest::Approx(0.5));
}

TEST_CASE("pearson errors") {
    const std::vector<double> x = {1, 2, 3}, flat = {4, 4, 4}, shorter = {1, 2};
    CHECK(code_of([&] { pearson(x, flat); }) == ErrorCode::ConstantInput);
    CHECK(code_of([&] { pearson(x, shorter); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("improvement is relative to the benchmark") {
    CHECK(improvement_percent(1.000, 0.994) == doctest::Approx(0.6036).epsilon(1e-3));
    CHECK(improvement_percent(0.710, 0.125) == doctest::Approx(468.0));
    CHECK(code_of([] { improvement_percent(0.5, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("batch rows per cell and method") {
    std::vector<CapacityFadeSeries> cells;
    for (const auto& c : generate_knee_family(3, 17)) cells.push_back(c.series);
    const auto r = batch_report(cells);
    CHECK(r.rows.size() == 6);
    CHECK(r.correlations.size() == 2);
    for (const auto& row : r.rows) CHECK(row.gap == row.knee_cycle - row.onset_cycle);
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i - 1].cell_id <= r.rows[i].cell_id);
    const auto csv = batch_csv(r);
    CHECK(csv.rfind("cell_id,method,onset_cycle,knee_cycle,eol_cycle,gap\n", 0) == 0);
    CHECK(csv.find("# pearson_knee_eol[curvature_rea]=") != std::string::npos);
    CHECK(csv.find("# n_cells[double_bacon_watts]=3") != std::string::npos);
}

TEST_CASE("jobs do not change the batch") {
    std::vector<CapacityFadeSeries> cells;
    for (const auto& c : generate_knee_family(4, 23)) cells.push_back(c.series);
    BatchOptions one, four;
    four.jobs = 4;
    CHECK(batch_csv(batch_report(cells, one)) == batch_csv(batch_report(cells, four)));
}

TEST_CASE("identical cells surface a constant-input problem but keep their rows") {
    auto cell = generate_knee_family(1, 2).front().series;
    auto twin = cell;
    twin.cell_id = cell.cell_id + "_twin";
    BatchOptions opts;
    opts.methods = {Method::CurvatureRea};
    const auto r = batch_report({cell, twin}, opts);
    CHECK(r.rows.size() == 2);
    REQUIRE(r.correlations.size() == 1);
    CHECK(r.correlations[0].problem == "ConstantInput");
    CHECK_FALSE(r.correlations[0].r_knee_eol.has_value());
    CHECK(batch_csv(r).find("# problem[curvature_rea]=ConstantInput") != std::string::npos);
}

TEST_CASE("single method gives one section and no improvement line") {
    std::vector<CapacityFadeSeries> cells;
    for (const auto& c : generate_knee_family(3, 9)) cells.push_back(c.series);
    BatchOptions opts;
    opts.methods = {Method::CurvatureRea};
    const auto r = batch_report(cells, opts);
    CHECK(r.correlations.size() == 1);
    CHECK_FALSE(r.improvement_knee_pct.has_value());
    CHECK(batch_csv(r).find("double_bacon_watts") == std::string::npos);
    opts.methods.clear();
    CHECK(code_of([&] { batch_report(cells, opts); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("knee report json carries the method tag") {
    KneeReport rep;
    rep.cell_id = "x";
    rep.onset_cycle = 10;
    rep.knee_cycle = 20;
    const auto j = knee_report_json(rep);
    CHECK(j.find("\"curvature_rea\"") != std::string::npos);
    CHECK(j.find("\"onset_cycle\"") != std::string::npos);
}

}
