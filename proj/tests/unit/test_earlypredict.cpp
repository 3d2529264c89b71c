#include <doctest.h>

#include <cmath>
#include <numeric>

#include "kneescout/earlypredict.hpp"
#include "kneescout/error.hpp"
#include "kneescout/synthgen.hpp"
#include "support.hpp"

using namespace kneescout;
using support::code_of;

namespace {

// q(V) = base + slope * (v_hi - V) on a descending grid.
CycleRecord linear_cycle(Cycle cycle, double base, double slope, double v_hi = 3.6, double v_lo = 2.0, int points = 200) {
    CycleRecord r;
    r.cycle = cycle;
    for (int i = 0; i < points; ++i) {
        const double v = v_hi - (v_hi - v_lo) * i / (points - 1);
        r.voltage_v.push_back(v);
        r.q_ah.push_back(base + slope * (v_hi - v));
    }
    return r;
}

// Cycles 1..last with a slow fade; cycle 5 holds the largest capacity.
CellRecords fading_cell(int last = 35) {
    CellRecords cell;
    for (int c = 1; c <= last; ++c) {
        const double scale = c == 5 ? 1.02 : 1.0 - 1e-3 * c;
        CycleRecord r;
        r.cycle = c;
        for (int i = 0; i < 100; ++i) {
            const double v = 3.6 - 1.6 * i / 99.0;
            r.voltage_v.push_back(v);
            r.q_ah.push_back(scale * 1.1 / (1.0 + std::exp(-(3.3 - v) * 12.0 * (1.0 + 0.002 * c))));
        }
        cell.push_back(std::move(r));
    }
    return cell;
}

double rmse_of(const GbrtModel& m, const FeatureMatrix& X, const std::vector<double>& y) {
    double ss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) ss += std::pow(gbrt_predict(m, X[i]) - y[i], 2);
    return std::sqrt(ss / static_cast<double>(y.size()));
}

}  // namespace

TEST_SUITE("earlypredict") {

TEST_CASE("identical cycles give zero delta Q") {
    const CellRecords cell = {linear_cycle(10, 0.0, 0.5), linear_cycle(30, 0.0, 0.5)};
    for (double d : delta_q(cell)) CHECK(d == 0.0);
}

TEST_CASE("constant capacity shift gives constant delta Q") {
    const CellRecords cell = {linear_cycle(10, 0.0, 0.5), linear_cycle(30, 0.01, 0.5)};
    const auto dq = delta_q(cell);
    CHECK(dq.size() == 1000);
    for (double d : dq) CHECK(d == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(moments(dq).variance < 1e-24);
}

TEST_CASE("disjoint voltage windows") {
    const CellRecords cell = {linear_cycle(10, 0.0, 0.5, 3.6, 3.0), linear_cycle(30, 0.0, 0.5, 2.9, 2.0)};
    CHECK(code_of([&] { delta_q(cell); }) == ErrorCode::NoVoltageOverlap);
}

TEST_CASE("linear delta Q ramp has the closed-form population variance") {
    const CellRecords cell = {linear_cycle(10, 0.0, 0.5), linear_cycle(30, 0.0, 0.55)};
    const auto dq = delta_q(cell);
    const double m = 1000.0, step = 0.05 * 1.6 / (m - 1);
    CHECK(moments(dq).variance == doctest::Approx(step * step * (m * m - 1) / 12).epsilon(1e-10));
    CHECK(std::abs(moments(dq).skewness) < 1e-9);
}

TEST_CASE("moments conventions") {
    const std::vector<double> flat(7, 2.5);
    const auto f = moments(flat);
    CHECK(f.variance == 0.0);
    CHECK(f.skewness == 0.0);
    CHECK(f.kurtosis == 0.0);
    const std::vector<double> v = {1, 2, 3, 4};
    const auto m = moments(v);
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.variance == doctest::Approx(1.25));
    CHECK(m.skewness == doctest::Approx(0.0));
    CHECK(m.kurtosis == doctest::Approx(1.64));
}

TEST_CASE("budget 30 features use cycles 10, 30 and 2") {
    const auto cell = fading_cell();
    const auto f = extract_features(cell, 30);
    const auto dq = delta_q(cell, 10, 30);
    const auto mo = moments(dq);
    CHECK(f.min_dq == *std::min_element(dq.begin(), dq.end()));
    CHECK(f.var_dq == mo.variance);
    CHECK(f.skew_dq == mo.skewness);
    CHECK(f.kurt_dq == mo.kurtosis);
    CHECK(f.q2 == cell[1].discharge_capacity());
    CHECK(f.q_max_minus_2 == doctest::Approx(cell[4].discharge_capacity() - cell[1].discharge_capacity()));
}

TEST_CASE("budget moves the late anchor") {
    const auto cell = fading_cell();
    const auto dq = delta_q(cell, 10, 20);
    CHECK(extract_features(cell, 20).min_dq == *std::min_element(dq.begin(), dq.end()));
    CHECK(code_of([&] { extract_features(cell, 10); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { extract_features(cell, 36); }) == ErrorCode::MissingCycle);
}

TEST_CASE("cycle csv round trip") {
    const auto cell = fading_cell(12);
    const auto dir = support::scratch_dir("cycles");
    write_cycle_csv(dir / "c.cycles.csv", cell);
    const auto back = load_cycle_csv(dir / "c.cycles.csv");
    REQUIRE(back.size() == cell.size());
    for (std::size_t i = 0; i < cell.size(); ++i) {
        CHECK(back[i].cycle == cell[i].cycle);
        CHECK(back[i].voltage_v == cell[i].voltage_v);
        CHECK(back[i].q_ah == cell[i].q_ah);
    }
}

TEST_CASE("stratified split keeps class ratios") {
    const std::vector<double> labels = {100, 100, 100, 100, 100, 300, 300, 300, 300, 300};
    const auto s = stratified_split(labels, 0.8, 42);
    CHECK(s.train.size() == 8);
    CHECK(s.test.size() == 2);
    int low_test = 0;
    for (auto i : s.test) low_test += labels[i] < 150;
    CHECK(low_test == 1);
    const auto again = stratified_split(labels, 0.8, 42);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);
}

TEST_CASE("a singleton class goes to training") {
    const std::vector<double> labels = {100, 100, 100, 100, 100, 200};
    const auto s = stratified_split(labels, 0.8, 1);
    CHECK(std::find(s.train.begin(), s.train.end(), 5u) != s.train.end());
}

TEST_CASE("no trees predicts the training mean") {
    const FeatureMatrix X = {{1, 0}, {2, 1}, {3, 0}, {4, 1}};
    const std::vector<double> y = {10, 20, 30, 60};
    GbrtHyper h;
    h.n_trees = 0;
    const auto m = gbrt_train(X, y, h);
    const std::vector<double> probe = {100, -3};
    CHECK(gbrt_predict(m, probe) == doctest::Approx(30.0));
}

TEST_CASE("training RMSE never rises and small sets are interpolated") {
    const FeatureMatrix X = {{0.1, 5}, {0.4, 3}, {0.2, 8}, {0.9, 1}, {0.5, 6}, {0.7, 2}, {0.3, 9}, {0.8, 4}};
    const std::vector<double> y = {120, 340, 180, 510, 260, 400, 150, 470};
    GbrtHyper h;
    h.n_trees = 200;
    h.max_depth = 3;
    h.min_leaf = 1;
    std::vector<double> curve;
    const auto m = gbrt_train(X, y, h, &curve);
    REQUIRE(curve.size() == 201);
    for (std::size_t k = 1; k < curve.size(); ++k) CHECK(curve[k] <= curve[k - 1] + 1e-12);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 8;
    double var = 0;
    for (double v : y) var += (v - mean) * (v - mean) / 8;
    CHECK(rmse_of(m, X, y) < 1e-3 * std::sqrt(var));
    CHECK(curve.back() == doctest::Approx(rmse_of(m, X, y)).epsilon(1e-9));
}

TEST_CASE("hand-built stump") {
    GbrtModel m;
    m.init_value = 10.0;
    m.learning_rate = 0.5;
    m.n_features = 1;
    RegressionTree t;
    t.nodes = {{0, 1.0, 1, 2, 0.0}, {-1, 0.0, -1, -1, -4.0}, {-1, 0.0, -1, -1, 6.0}};
    m.trees.push_back(t);
    const std::vector<double> lo = {0.5}, at = {1.0}, hi = {2.0};
    CHECK(gbrt_predict(m, lo) == 8.0);
    CHECK(gbrt_predict(m, at) == 8.0);
    CHECK(gbrt_predict(m, hi) == 13.0);
    const std::vector<double> wide = {1.0, 2.0};
    CHECK(code_of([&] { gbrt_predict(m, wide); }) == ErrorCode::FeatureCountMismatch);
}

TEST_CASE("model json round trip predicts identically") {
    const FeatureMatrix X = {{0.1, 5}, {0.4, 3}, {0.2, 8}, {0.9, 1}, {0.5, 6}, {0.7, 2}};
    const std::vector<double> y = {120, 340, 180, 510, 260, 400};
    GbrtHyper h;
    h.n_trees = 30;
    const auto m = gbrt_train(X, y, h);
    const auto back = model_from_json(model_to_json(m));
    for (const auto& row : X) CHECK(gbrt_predict(back, row) == gbrt_predict(m, row));
    CHECK(code_of([] { model_from_json("{not json"); }) == ErrorCode::ParseError);
}

TEST_CASE("training input errors") {
    CHECK(code_of([] { gbrt_train({}, std::vector<double>{}); }) == ErrorCode::EmptyTrainingSet);
    const FeatureMatrix X = {{1.0}, {std::nan("")}};
    CHECK(code_of([&] { gbrt_train(X, std::vector<double>{1, 2}); }) == ErrorCode::NonFiniteFeature);
}

TEST_CASE("evaluate by hand") {
    const std::vector<double> y = {100, 200}, yh = {110, 180};
    const auto m = evaluate(y, yh);
    CHECK(m.rmse == doctest::Approx(std::sqrt(250.0)));
    CHECK(m.mape == doctest::Approx(10.0));
    const auto same = evaluate(y, y);
    CHECK(same.rmse == 0.0);
    CHECK(same.mape == 0.0);
    const std::vector<double> zero = {0, 1};
    CHECK(code_of([&] { evaluate(zero, yh); }) == ErrorCode::ZeroTrueValue);
}

TEST_CASE("sweep is deterministic for a fixed seed") {
    const auto cells = simulate_fleet(30, 5);
    const std::vector<int> budgets = {20};
    GbrtHyper h;
    h.n_trees = 40;
    const auto a = sensitivity_sweep(cells, budgets, 1, 7, h);
    const auto b = sensitivity_sweep(cells, budgets, 1, 7, h, 3);
    REQUIRE(a.size() == 1);
    CHECK(a[0].budget == 20);
    CHECK(a[0].rmse == b[0].rmse);
    CHECK(a[0].mape == b[0].mape);
    const std::vector<int> too_early = {10};
    CHECK(code_of([&] { sensitivity_sweep(cells, too_early, 1, 7, h); }) == ErrorCode::InvalidArgument);
}

}
