#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kneescout/error.hpp"
#include "kneescout/matrixprofile.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kneescout;
using support::code_of;

TEST_SUITE("matrixprofile") {

TEST_CASE("mass matches direct distances") {
    const auto s = oracle::random_walk(64, 3);
    const std::span<const double> series(s);
    for (std::size_t q : {0u, 17u, 56u}) {
        const auto dp = mass(series.subspan(q, 8), series);
        REQUIRE(dp.distances.size() == 57);
        for (std::size_t j = 0; j < dp.distances.size(); ++j)
            CHECK(std::abs(dp.distances[j] - oracle::znorm_dist(series.subspan(q, 8), series.subspan(j, 8))) < 1e-9);
        CHECK(dp.distances[q] < 1e-6);
    }
}

TEST_CASE("mass distance is invariant to affine maps of the series") {
    const auto s = oracle::random_walk(100, 9);
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = 4.0 * s[i] - 7.0;
    const std::span<const double> a(s), b(t);
    const auto da = mass(a.subspan(20, 10), a);
    const auto db = mass(b.subspan(20, 10), b);
    for (std::size_t j = 0; j < da.distances.size(); ++j) CHECK(std::abs(da.distances[j] - db.distances[j]) < 1e-8);
}

TEST_CASE("planted motif pair is found") {
    auto s = oracle::gaussian(300, 21);
    const std::vector<double> motif = {0, 3, 6, 9, 6, 3, 0, -3, -6, -3};
    for (std::size_t k = 0; k < motif.size(); ++k) {
        s[40 + k] = motif[k];
        s[210 + k] = motif[k] + 0.01 * static_cast<double>(k % 2);
    }
    const auto mp = stamp(s, 10);
    CHECK(mp.I[40] == 210);
    CHECK(mp.I[210] == 40);
    CHECK(mp.P[40] < 0.1);
}

TEST_CASE("sine with window equal to the period matches one period away") {
    const int p = 25;
    std::vector<double> s(8 * p);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / p);
    const auto mp = stamp(s, p);
    for (double d : mp.P) CHECK(d < 1e-6);
    for (std::size_t j = 0; j < mp.size(); ++j) {
        const auto lag = j > mp.I[j] ? j - mp.I[j] : mp.I[j] - j;
        CHECK(lag % p == 0);
    }
}

TEST_CASE("stamp agrees with the naive profile") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (int L : {3, 8, 20}) {
            const auto s = oracle::random_walk(200, seed);
            const auto mp = stamp(s, L);
            const auto ref = oracle::naive_stamp(s, static_cast<std::size_t>(L), static_cast<std::size_t>(default_exclusion(L)));
            REQUIRE(mp.size() == ref.P.size());
            for (std::size_t j = 0; j < mp.size(); ++j) {
                CHECK(std::abs(mp.P[j] - ref.P[j]) < 1e-9);
                if (ref.second_gap[j] > 1e-6) CHECK(mp.I[j] == ref.I[j]);
            }
        }
    }
}

TEST_CASE("profile is affine invariant") {
    const auto s = oracle::random_walk(150, 44);
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = -0.5 * s[i] + 1000.0;
    const auto a = stamp(s, 8), b = stamp(t, 8);
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a.P[j] - b.P[j]) < 1e-8);
}

TEST_CASE("thread count does not change the result") {
    const auto s = oracle::random_walk(400, 8);
    const auto one = stamp(s, 12, -1, 1), four = stamp(s, 12, -1, 4);
    CHECK(one.P == four.P);
    CHECK(one.I == four.I);
}

TEST_CASE("flat windows") {
    std::vector<double> s(40, 2.0);
    for (std::size_t i = 20; i < 40; ++i) s[i] = static_cast<double>(i % 3);
    const std::span<const double> v(s);
    CHECK(znorm_distance(v.subspan(0, 5), v.subspan(5, 5)) == 0.0);
    CHECK(znorm_distance(v.subspan(0, 5), v.subspan(25, 5)) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("default exclusion is ceil(L/2)") {
    CHECK(default_exclusion(3) == 2);
    CHECK(default_exclusion(8) == 4);
    const auto mp = stamp(oracle::random_walk(50, 1), 8);
    CHECK(mp.exclusion == 4);
    CHECK(mp.window == 8);
}

TEST_CASE("sliding stats") {
    const std::vector<double> s = {1, 2, 3, 4, 5};
    const auto st = sliding_stats(s, 3);
    REQUIRE(st.mean.size() == 3);
    CHECK(st.mean[0] == doctest::Approx(2.0));
    CHECK(st.mean[2] == doctest::Approx(4.0));
    CHECK(st.std[1] == doctest::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("window errors") {
    const std::vector<double> s = oracle::random_walk(16, 2);
    CHECK(code_of([&] { stamp(s, 16); }) == ErrorCode::SeriesTooShort);
    CHECK(code_of([&] { stamp(s, 1); }) == ErrorCode::DegenerateWindow);
    const std::span<const double> v(s);
    CHECK(code_of([&] { mass(v.subspan(0, 1), v); }) == ErrorCode::DegenerateWindow);
}

}
