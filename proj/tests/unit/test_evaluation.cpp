#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "hybridroute/errors.hpp"
#include "hybridroute/evaluation.hpp"
#include "json.hpp"

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

std::vector<QuerySample> random_queries(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g(-2.0, 0.6);
    std::vector<QuerySample> out;
    for (std::size_t i = 0; i < n; ++i) {
        V s(4), l(4);
        for (auto& x : s) x = g(rng);
        for (auto& x : l) x = g(rng) + 0.2;
        out.push_back(query("q" + std::to_string(i), s, l));
    }
    return out;
}

}  // namespace

TEST_CASE("quality drop and cost advantage") {
    CHECK(quality_drop_pct(-2.2, -2.0) == doctest::Approx(10.0));
    CHECK(quality_drop_pct(-1.8, -2.0) == doctest::Approx(-10.0));
    CHECK(quality_drop_pct(9.0, 10.0) == doctest::Approx(10.0));
    CHECK_THROWS_AS(quality_drop_pct(1.0, 0.0), DomainError);

    std::vector<RoutingDecision> r{{"a", Target::small, {}}, {"b", Target::large, {}}, {"c", Target::small, {}},
                                   {"d", Target::large, {}}};
    CHECK(cost_advantage_pct(r) == 50.0);
}

TEST_CASE("mean quality follows the decisions") {
    const std::vector<QuerySample> qs{query("a", {-1.0, -3.0}, {-1.0}), query("b", {-4.0}, {-1.0, -2.0})};
    std::vector<RoutingDecision> r{{"b", Target::large, {}}, {"a", Target::small, {}}};
    CHECK(mean_quality(r, qs, "bart_score") == doctest::Approx((-2.0 - 1.5) / 2.0));
    r.pop_back();
    CHECK_THROWS_AS(mean_quality(r, qs, "bart_score"), InputError);
}

TEST_CASE("tradeoff curve matches brute force") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int trial = 0; trial < 30; ++trial) {
        const auto qs = random_queries(rng, 40);
        V scores;
        for (std::size_t i = 0; i < qs.size(); ++i) scores.push_back(std::round(u(rng) * 20.0) / 20.0 * 0.98 + 0.01);
        const auto curve = tradeoff_curve(scores, qs, "bart_score");
        REQUIRE(curve.size() >= 2);
        CHECK(curve.front().cost_advantage_pct == 0.0);
        CHECK(curve.front().quality_drop_pct == 0.0);
        CHECK(curve.back().cost_advantage_pct == 100.0);
        const auto all_small = oracle::at_threshold(qs, scores, "bart_score", -1.0);
        CHECK(curve.back().quality_drop_pct == doctest::Approx(all_small.drop_pct).epsilon(1e-12));
        for (std::size_t i = 0; i < curve.size(); ++i) {
            const auto want = oracle::at_threshold(qs, scores, "bart_score", curve[i].threshold);
            CHECK(curve[i].cost_advantage_pct == want.cost_advantage_pct);
            CHECK(curve[i].quality_drop_pct == doctest::Approx(want.drop_pct).epsilon(1e-12));
            if (i > 0) CHECK(curve[i].cost_advantage_pct > curve[i - 1].cost_advantage_pct);
        }
    }
}

TEST_CASE("drop at cost advantage interpolates") {
    const std::vector<TradeoffPoint> curve{{1.0, 0.0, 0.0}, {0.5, 50.0, 2.0}, {0.0, 100.0, 10.0}};
    CHECK(drop_at_cost_advantage(curve, 0.0) == 0.0);
    CHECK(drop_at_cost_advantage(curve, 25.0) == doctest::Approx(1.0));
    CHECK(drop_at_cost_advantage(curve, 50.0) == doctest::Approx(2.0));
    CHECK(drop_at_cost_advantage(curve, 75.0) == doctest::Approx(6.0));
    CHECK(drop_at_cost_advantage(curve, 100.0) == 10.0);
}

TEST_CASE("gap difference") {
    const std::vector<QuerySample> qs{query("a", {-1.0}, {-2.0}), query("b", {-3.0}, {-1.0}),
                                      query("c", {-2.0}, {-2.0})};
    std::vector<RoutingDecision> r{{"a", Target::small, {}}, {"b", Target::large, {}}, {"c", Target::large, {}}};
    REQUIRE(gap_difference(r, qs, "bart_score").has_value());
    CHECK(*gap_difference(r, qs, "bart_score") == doctest::Approx(1.0 - (-2.0 + 0.0) / 2.0));
    for (auto& d : r) d.target = Target::large;
    CHECK_FALSE(gap_difference(r, qs, "bart_score").has_value());
}

TEST_CASE("threshold for cost advantage") {
    const V scores{0.1, 0.2, 0.3, 0.4};
    const double th = threshold_for_cost_advantage(scores, 50.0);
    int above = 0;
    for (double s : scores) above += s > th;
    CHECK(above == 2);
    CHECK(threshold_for_cost_advantage(scores, 0.0) == 1.0);
    CHECK(threshold_for_cost_advantage(scores, 100.0) == 0.0);
    // 37.5 is equidistant from 25 and 50; the lower one wins.
    const double tie = threshold_for_cost_advantage(scores, 37.5);
    above = 0;
    for (double s : scores) above += s > tie;
    CHECK(above == 1);
}

TEST_CASE("correlations") {
    CHECK(pearson(V{1, 2, 3}, V{1, 2, 4}) == doctest::Approx(0.9819805060619655).epsilon(1e-12));
    CHECK(spearman(V{1, 1, 2}, V{1, 2, 3}) == doctest::Approx(0.8660254037844387).epsilon(1e-12));
    CHECK(spearman(V{1, 2, 3}, V{3, 1, 2}) == doctest::Approx(-0.5));
    CHECK(average_ranks(V{10, 20, 10, 5}) == V{2.5, 4.0, 2.5, 1.0});
    CHECK_THROWS_AS(pearson(V{1}, V{1}), InputError);
    CHECK_THROWS_AS(pearson(V{1, 2}, V{1}), InputError);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        V a(25), b(25);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = std::round(g(rng) * 3.0);
            b[i] = a[i] * 0.5 + std::round(g(rng) * 3.0);
        }
        CHECK(pearson(a, b) == doctest::Approx(oracle::pearson(a, b)).epsilon(1e-9));
        CHECK(spearman(a, b) == doctest::Approx(oracle::spearman(a, b)).epsilon(1e-9));
        CHECK(average_ranks(a) == oracle::ranks(a));
        CHECK(std::abs(pearson(a, b)) <= 1.0);
    }
}

TEST_CASE("random baseline is reproducible and near the diagonal") {
    std::mt19937_64 rng(17);
    const auto qs = random_queries(rng, 300);
    const auto a = random_baseline(qs, "bart_score", 0.4, 1234);
    const auto b = random_baseline(qs, "bart_score", 0.4, 1234);
    CHECK(a.quality_drop_pct == b.quality_drop_pct);
    CHECK(a.gap_difference == b.gap_difference);
    CHECK(std::abs(a.cost_advantage_pct - 60.0) < 3.0);
    CHECK(a.quality_drop_stderr > 0.0);
    CHECK(std::abs(a.gap_difference) < 4.0 * a.gap_difference_stderr + 1e-9);
    const auto all_large = random_baseline(qs, "bart_score", 1.0, 1);
    CHECK(all_large.cost_advantage_pct == 0.0);
    CHECK(all_large.quality_drop_pct == 0.0);
}

TEST_CASE("evaluate report and CSV") {
    std::mt19937_64 rng(23);
    auto qs = random_queries(rng, 50);
    std::normal_distribution<double> g(6.0, 1.0);
    for (auto& q : qs) {
        q.small["gpt4_score"] = {g(rng), g(rng)};
        q.large["gpt4_score"] = {g(rng), g(rng)};
    }
    std::uniform_real_distribution<double> u(0.01, 0.99);
    V scores;
    for (std::size_t i = 0; i < qs.size(); ++i) scores.push_back(u(rng));
    const auto r = evaluate(scores, qs, "bart_score", 7, "pair");
    CHECK(r.points.size() == 51);
    CHECK(r.all_large_drop_pct == 0.0);
    CHECK(r.all_small_drop_pct == doctest::Approx(r.points.back().quality_drop_pct));
    CHECK(r.random_curve.size() == 11);
    CHECK_FALSE(r.correlations.has_value());

    const auto x = cross_metric_report(scores, qs, "bart_score", "gpt4_score", 7, "pair");
    REQUIRE(x.correlations.has_value());
    CHECK(x.metric == "gpt4_score");
    CHECK(x.train_metric == "bart_score");

    const auto j = nlohmann::json::parse(report_to_json(x));
    CHECK(j.contains("points"));
    CHECK(report_to_json(x) == report_to_json(cross_metric_report(scores, qs, "bart_score", "gpt4_score", 7, "pair")));

    const std::string csv = curve_to_csv(r.points);
    CHECK(csv.rfind("threshold,cost_advantage_pct,quality_drop_pct\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == r.points.size() + 1);
}

TEST_CASE("curve sizes") {
    std::mt19937_64 rng(31);
    const auto qs = random_queries(rng, 8);
    const V distinct{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    const auto curve = tradeoff_curve(distinct, qs, "bart_score");
    REQUIRE(curve.size() == 9);
    for (std::size_t i = 0; i < curve.size(); ++i) CHECK(curve[i].cost_advantage_pct == doctest::Approx(12.5 * i));
    CHECK(tradeoff_curve(V(8, 0.4), qs, "bart_score").size() == 2);
}

TEST_CASE("gap difference of opposite gaps") {
    const std::vector<QuerySample> qs{query("a", {0.0}, {-1.0}), query("b", {-1.0}, {0.0})};
    const std::vector<RoutingDecision> r{{"a", Target::small, {}}, {"b", Target::large, {}}};
    CHECK(*gap_difference(r, qs, "bart_score") == 2.0);
}

TEST_CASE("zero variance correlations are undefined") {
    CHECK_THROWS_AS(pearson(V{1, 1, 1}, V{1, 2, 3}), DomainError);
    CHECK_THROWS_AS(spearman(V{1, 2, 3}, V{5, 5, 5}), DomainError);
}

TEST_CASE("cross-metric report against itself") {
    std::mt19937_64 rng(41);
    const auto qs = random_queries(rng, 30);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    V scores;
    for (std::size_t i = 0; i < qs.size(); ++i) scores.push_back(u(rng));
    const auto r = cross_metric_report(scores, qs, "bart_score", "bart_score", 3);
    REQUIRE(r.correlations.has_value());
    CHECK(r.correlations->first == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.correlations->second == doctest::Approx(1.0).epsilon(1e-12));
    const auto plain = tradeoff_curve(scores, qs, "bart_score");
    REQUIRE(plain.size() == r.points.size());
    for (std::size_t i = 0; i < plain.size(); ++i) CHECK(plain[i].quality_drop_pct == r.points[i].quality_drop_pct);
}
