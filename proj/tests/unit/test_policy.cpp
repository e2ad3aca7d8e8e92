#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "../support/oracles.hpp"
#include "hybridroute/errors.hpp"
#include "hybridroute/policy.hpp"

using namespace hybridroute;
using V = std::vector<double>;

namespace {

QuerySample query(const std::string& id, V s, V l) {
    QuerySample q;
    q.id = id;
    q.small["bart_score"] = std::move(s);
    q.large["bart_score"] = std::move(l);
    return q;
}

}  // namespace

TEST_CASE("learned policy uses a strict inequality") {
    auto p = RoutingPolicy::learned(0.5);
    CHECK(p.decide(0.7) == Target::small);
    CHECK(p.decide(0.5) == Target::large);
    CHECK(p.decide(0.3) == Target::large);
    CHECK_THROWS_AS(p.decide(std::nullopt), InputError);
}

TEST_CASE("sentinel thresholds") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto lo = RoutingPolicy::learned(kBelowMinThreshold);
    auto hi = RoutingPolicy::learned(kAboveMaxThreshold);
    for (int i = 0; i < 1000; ++i) {
        const double s = std::nextafter(u(rng), 1.0);
        CHECK(lo.decide(s) == Target::small);
        CHECK(hi.decide(s) == Target::large);
    }
}

TEST_CASE("fixed policies") {
    auto s = RoutingPolicy::all_small();
    auto l = RoutingPolicy::all_large();
    CHECK(s.decide(std::nullopt) == Target::small);
    CHECK(l.decide(0.99) == Target::large);
}

TEST_CASE("random policy") {
    auto a = RoutingPolicy::random(0.3, 77);
    auto b = RoutingPolicy::random(0.3, 77);
    int large = 0;
    for (int i = 0; i < 20000; ++i) {
        const Target t = a.decide(std::nullopt);
        CHECK(t == b.decide(std::nullopt));
        large += t == Target::large;
    }
    CHECK(std::abs(large / 20000.0 - 0.3) < 0.02);
    auto never = RoutingPolicy::random(0.0, 1);
    auto always = RoutingPolicy::random(1.0, 1);
    for (int i = 0; i < 100; ++i) {
        CHECK(never.decide(std::nullopt) == Target::small);
        CHECK(always.decide(std::nullopt) == Target::large);
    }
    CHECK_THROWS_AS(RoutingPolicy::random(1.5, 1), InputError);
}

TEST_CASE("midpoint thresholds") {
    const auto g = midpoint_thresholds(V{0.8, 0.2, 0.8, 0.4});
    REQUIRE(g.size() == 4);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == doctest::Approx(0.3));
    CHECK(g[2] == doctest::Approx(0.6));
    CHECK(g[3] == 1.0);
    // Adjacent doubles still get separated.
    const double a = 0.5;
    const double b = std::nextafter(a, 1.0);
    const auto tight = midpoint_thresholds(V{a, b});
    CHECK(route_by_threshold(a, tight[1]) == Target::large);
    CHECK(route_by_threshold(b, tight[1]) == Target::small);
}

TEST_CASE("calibration worked example") {
    const std::vector<QuerySample> val{query("a", {-1.0}, {-1.0}), query("b", {-1.0}, {-1.0}),
                                       query("c", {-4.0}, {-1.0}), query("d", {-4.0}, {-1.0})};
    const V scores{0.8, 0.8, 0.2, 0.2};
    const auto r = calibrate_threshold(val, scores, "bart_score", 0.0);
    CHECK(r.feasible);
    CHECK(r.threshold == 0.5);
    CHECK(r.achieved_cost_advantage_pct == 50.0);
    CHECK(r.achieved_drop_pct == 0.0);

    const auto loose = calibrate_threshold(val, scores, "bart_score", 1000.0);
    CHECK(loose.threshold == 0.0);
    CHECK(loose.achieved_cost_advantage_pct == 100.0);
}

TEST_CASE("calibration infeasible falls back to all-at-large") {
    const std::vector<QuerySample> val{query("a", {-1.0}, {-1.0})};
    const auto r = calibrate_threshold(val, V{0.5}, "bart_score", -5.0);
    CHECK_FALSE(r.feasible);
    CHECK(r.threshold == kAboveMaxThreshold);
    CHECK(r.achieved_cost_advantage_pct == 0.0);
}

TEST_CASE("calibration ties prefer the larger threshold") {
    // Both thresholds below route everything small; the larger one wins.
    const std::vector<QuerySample> val{query("a", {-1.0}, {-2.0}), query("b", {-1.0}, {-2.0})};
    const auto r = calibrate_threshold(val, V{0.6, 0.6}, "bart_score", 0.0, V{0.1, 0.2, 0.3});
    CHECK(r.threshold == 0.3);
}

TEST_CASE("calibration against brute force") {
    std::mt19937_64 rng(2718);
    std::normal_distribution<double> g(-2.0, 0.6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> md(-2.0, 15.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<QuerySample> val;
        V scores;
        for (int i = 0; i < 12; ++i) {
            V s(3), l(3);
            for (auto& x : s) x = g(rng);
            for (auto& x : l) x = g(rng);
            val.push_back(query("q" + std::to_string(i), s, l));
            // Coarse scores so ties are common.
            scores.push_back(std::round(u(rng) * 8.0) / 8.0 * 0.98 + 0.01);
        }
        const double max_drop = md(rng);
        const auto grid = midpoint_thresholds(scores);
        const auto want = oracle::calibrate(val, scores, "bart_score", max_drop, grid);
        const auto got = calibrate_threshold(val, scores, "bart_score", max_drop);
        CHECK(got.feasible == want.feasible);
        CHECK(got.threshold == want.threshold);
        CHECK(got.achieved_cost_advantage_pct == want.cost_advantage_pct);
        CHECK(got.achieved_drop_pct == doctest::Approx(want.drop_pct).epsilon(1e-12));
    }
}

TEST_CASE("calibration input errors") {
    const std::vector<QuerySample> val{query("a", {-1.0}, {-1.0})};
    CHECK_THROWS_AS(calibrate_threshold({}, V{}, "bart_score", 1.0), InputError);
    CHECK_THROWS_AS(calibrate_threshold(val, V{0.1, 0.2}, "bart_score", 1.0), InputError);
    CHECK_THROWS_AS(calibrate_threshold(val, V{0.1}, "bart_score", std::nan("")), InputError);
}

TEST_CASE("calibration on four queries with a 1% budget") {
    // Small matches large on the two high-score queries and is 10% worse on the rest.
    const std::vector<QuerySample> val{query("a", {-2.0}, {-2.0}), query("b", {-2.0}, {-2.0}),
                                       query("c", {-2.2}, {-2.0}), query("d", {-2.2}, {-2.0})};
    const V scores{0.9, 0.8, 0.2, 0.1};
    const auto r = calibrate_threshold(val, scores, "bart_score", 1.0);
    CHECK(r.threshold > 0.2);
    CHECK(r.threshold < 0.8);
    CHECK(r.achieved_cost_advantage_pct == 50.0);
    CHECK(r.achieved_drop_pct == 0.0);

    const auto unlimited = calibrate_threshold(val, scores, "bart_score", std::numeric_limits<double>::infinity());
    CHECK(unlimited.threshold == kBelowMinThreshold);
    CHECK(unlimited.achieved_cost_advantage_pct == 100.0);
}

TEST_CASE("zero budget when small never wins") {
    const std::vector<QuerySample> val{query("a", {-3.0}, {-2.0}), query("b", {-2.5}, {-2.0})};
    const auto r = calibrate_threshold(val, V{0.3, 0.6}, "bart_score", 0.0);
    CHECK(r.threshold == kAboveMaxThreshold);
    CHECK(r.achieved_cost_advantage_pct == 0.0);
}

TEST_CASE("cost advantage is non-increasing in the threshold") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    V scores(50);
    for (auto& s : scores) s = u(rng);
    int prev = 51;
    for (double th = 0.0; th <= 1.0; th += 0.01) {
        int small = 0;
        for (double s : scores) small += route_by_threshold(s, th) == Target::small;
        CHECK(small <= prev);
        prev = small;
    }
}
