#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "kneescout/baconwatts.hpp"
#include "kneescout/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kneescout;
using support::code_of;

namespace {

// Piecewise slopes s1, s2, s3 with transitions at x0 and x2; q(1) = 1.1.
DbwParams from_slopes(double s1, double s2, double s3, double x0, double x2) {
    DbwParams p;
    p.alpha2 = (s2 - s1) / 2;
    p.alpha3 = (s3 - s2) / 2;
    p.alpha1 = s1 + p.alpha2 + p.alpha3;
    p.x0 = x0;
    p.x2 = x2;
    p.alpha0 = 0.0;
    p.alpha0 = 1.1 - dbw_model(1.0, p);
    return p;
}

CapacityFadeSeries sample(const DbwParams& p, int n) {
    CapacityFadeSeries s{"dbw", {}, {}, 1.1};
    for (int c = 1; c <= n; ++c) {
        s.cycles.push_back(c);
        s.capacity_ah.push_back(dbw_model(c, p));
    }
    return s;
}

}  // namespace

TEST_SUITE("baconwatts") {

TEST_CASE("model at the transitions") {
    const DbwParams p{1.0, -1e-4, -2e-4, -3e-4, 100, 200, 10};
    CHECK(dbw_model(100, p) == doctest::Approx(1.0 + -3e-4 * -100 * std::tanh(-10.0)));
    const DbwParams flat{0.7, 0, 0, 0, 100, 200, 10};
    CHECK(dbw_model(12345, flat) == 0.7);
}

TEST_CASE("small gamma gives broken lines") {
    const DbwParams p{1.0, -1e-4, -2e-4, -3e-4, 100, 200, 1e-6};
    for (double x : {10.0, 150.0, 300.0})
        CHECK(dbw_model(x, p) == doctest::Approx(1.0 - 1e-4 * (x - 100) - 2e-4 * std::abs(x - 100) - 3e-4 * std::abs(x - 200)));
}

TEST_CASE("central jacobian matches analytic derivatives") {
    const std::vector<double> xs = {0.5, 1.0, 1.5, 2.0};
    ResidualFn fn = [&](std::span<const double> t, std::span<double> out) {
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = t[0] * t[0] * xs[i] + std::sin(t[1] * xs[i]);
    };
    const std::vector<double> theta = {1.3, 0.7};
    for (double h : {1e-4, 1e-5}) {
        const std::vector<double> steps = {h, h};
        const auto J = central_jacobian(fn, xs.size(), theta, steps);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            CHECK(std::abs(J(r, 0) - 2 * theta[0] * xs[i]) < 1e-7);
            CHECK(std::abs(J(r, 1) - xs[i] * std::cos(theta[1] * xs[i])) < 1e-7);
        }
    }
}

TEST_CASE("lm on a linear problem matches the normal equations") {
    const std::vector<double> x = {0, 1, 2, 3, 4, 5}, y = {1.1, 2.9, 5.2, 7.1, 8.8, 11.2};
    ResidualFn fn = [&](std::span<const double> t, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = t[0] + t[1] * x[i] - y[i];
    };
    double sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sxx += x[i] * x[i];
        sy += y[i];
        sxy += x[i] * y[i];
    }
    const auto ref = oracle::solve_dense({static_cast<double>(x.size()), sx, sx, sxx}, {sy, sxy});
    const auto r = lm_optimize(fn, x.size(), {0.0, 0.0});
    CHECK(std::abs(r.params[0] - ref[0]) < 1e-8);
    CHECK(std::abs(r.params[1] - ref[1]) < 1e-8);
    CHECK(r.status == LmStatus::Converged);
}

TEST_CASE("lm solves rosenbrock") {
    ResidualFn fn = [](std::span<const double> t, std::span<double> out) {
        out[0] = 10 * (t[1] - t[0] * t[0]);
        out[1] = 1 - t[0];
    };
    const auto r = lm_optimize(fn, 2, {-1.2, 1.0});
    CHECK(std::abs(r.params[0] - 1) < 1e-6);
    CHECK(std::abs(r.params[1] - 1) < 1e-6);
    for (std::size_t i = 1; i < r.accepted_costs.size(); ++i) CHECK(r.accepted_costs[i] <= r.accepted_costs[i - 1]);
}

TEST_CASE("lm rejects a non-finite start") {
    ResidualFn fn = [](std::span<const double> t, std::span<double> out) { out[0] = t[0]; };
    CHECK(code_of([&] { lm_optimize(fn, 1, {std::numeric_limits<double>::quiet_NaN()}); }) ==
          ErrorCode::NonFiniteResidual);
}

TEST_CASE("lm reports running out of iterations") {
    ResidualFn fn = [](std::span<const double> t, std::span<double> out) {
        out[0] = 10 * (t[1] - t[0] * t[0]);
        out[1] = 1 - t[0];
    };
    LmOptions opts;
    opts.max_iter = 2;
    CHECK(lm_optimize(fn, 2, {-1.2, 1.0}, opts).status == LmStatus::MaxIterationsReached);
}

TEST_CASE("fit recovers its own model") {
    const auto truth = from_slopes(-1e-4, -4e-4, -1.2e-3, 690, 880);
    const auto fit = fit_dbw(sample(truth, 1000));
    CHECK(fit.residual_norm < 1e-6);
    CHECK(std::abs(std::min(fit.params.x0, fit.params.x2) - 690) < 1.0);
    CHECK(std::abs(std::max(fit.params.x0, fit.params.x2) - 880) < 1.0);
    const auto rep = identify_knees_dbw(sample(truth, 1000));
    CHECK(rep.onset_cycle == 690);
    CHECK(rep.knee_cycle == 880);
    CHECK(rep.diagnostics.at("transitions_identifiable") == 1.0);
    CHECK(rep.method == Method::DoubleBaconWatts);
}

TEST_CASE("swapped starting transitions reach the same pair") {
    const auto s = sample(from_slopes(-1e-4, -4e-4, -1.2e-3, 690, 880), 1000);
    DbwOptions swapped;
    swapped.swap_transition_init = true;
    const auto a = identify_knees_dbw(s), b = identify_knees_dbw(s, swapped);
    CHECK(a.onset_cycle == b.onset_cycle);
    CHECK(a.knee_cycle == b.knee_cycle);
}

TEST_CASE("affine data has no identifiable transitions") {
    CapacityFadeSeries s{"line", {}, {}, 1.1};
    for (int c = 1; c <= 300; ++c) {
        s.cycles.push_back(c);
        s.capacity_ah.push_back(1.1 - 3e-4 * c);
    }
    const auto r = identify_knees_dbw(s);
    CHECK(r.diagnostics.at("transitions_identifiable") == 0.0);
    CHECK(r.onset_cycle < r.knee_cycle);
}

TEST_CASE("input errors") {
    CapacityFadeSeries s{"short", {1, 2, 3, 4, 5}, {1.1, 1.09, 1.08, 1.07, 1.06}, 1.1};
    CHECK(code_of([&] { fit_dbw(s); }) == ErrorCode::TooShort);
    const auto ok = sample(from_slopes(-1e-4, -4e-4, -1.2e-3, 70, 88), 100);
    DbwOptions bad;
    bad.gamma = 0.0;
    CHECK(code_of([&] { fit_dbw(ok, bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("round_cycle sends halves up") {
    CHECK(round_cycle(2.5) == 3);
    CHECK(round_cycle(-2.5) == -2);
    CHECK(round_cycle(7.49) == 7);
}

}
