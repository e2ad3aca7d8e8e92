#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hybridroute/dataset.hpp"
#include "hybridroute/policy.hpp"

namespace hybridroute {

struct TradeoffPoint {
    double threshold = 0.0;
    double cost_advantage_pct = 0.0;
    double quality_drop_pct = 0.0;  // negative means better than all-at-large
};

/// Per-query mean quality of each model under one metric.
struct QualityMeans {
    std::vector<double> small;
    std::vector<double> large;
};

QualityMeans quality_means(const std::vector<QuerySample>& samples, const std::string& metric);

/// Mean over queries of the chosen model's per-query mean quality.
double mean_quality(const std::vector<RoutingDecision>& routing, const std::vector<QuerySample>& samples,
                    const std::string& metric);

/// 100 * (all_large_mean - routed_mean) / |all_large_mean|.
double quality_drop_pct(double routed_mean, double all_large_mean);

double cost_advantage_pct(const std::vector<RoutingDecision>& routing);

/// One point per midpoint threshold, sorted by cost advantage ascending. The
/// first point is all-at-large and the last all-at-small.
std::vector<TradeoffPoint> tradeoff_curve(std::span<const double> scores, const std::vector<QuerySample>& samples,
                                          const std::string& metric);

/// Linear interpolation of the drop at a requested cost advantage.
double drop_at_cost_advantage(const std::vector<TradeoffPoint>& curve, double cost_advantage_pct);

/// Mean gap of small-routed queries minus that of large-routed queries;
/// absent when either side is empty.
std::optional<double> gap_difference(const std::vector<RoutingDecision>& routing,
                                     const std::vector<QuerySample>& samples, const std::string& metric);

/// Midpoint threshold whose cost advantage is closest to the target (ties
/// resolve to the lower cost advantage).
double threshold_for_cost_advantage(std::span<const double> scores, double cost_advantage_pct);

double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);
/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> v);

struct RandomBaselinePoint {
    double p_large = 0.0;
    double cost_advantage_pct = 0.0;   // mean over seeds
    double quality_drop_pct = 0.0;     // mean over seeds
    double quality_drop_stderr = 0.0;
    double gap_difference = 0.0;       // mean over seeds with both sides non-empty
    double gap_difference_stderr = 0.0;
};

inline constexpr int kRandomBaselineSeeds = 32;

/// Random routing at one p_large, averaged over `seeds` generators seeded
/// base_seed, base_seed + 1, ...
RandomBaselinePoint random_baseline(const std::vector<QuerySample>& samples, const std::string& metric,
                                    double p_large, std::uint64_t base_seed, int seeds = kRandomBaselineSeeds);

struct GapDifferencePoint {
    double cost_advantage_pct = 0.0;
    double gap_difference = 0.0;
};

struct EvaluationReport {
    std::string pair_name;
    std::string metric;  // metric the curve is evaluated under
    std::string train_metric;
    std::vector<TradeoffPoint> points;
    std::vector<GapDifferencePoint> gap_difference;
    double all_small_drop_pct = 0.0;
    double all_large_drop_pct = 0.0;
    std::vector<RandomBaselinePoint> random_curve;
    std::optional<std::pair<double, double>> correlations;  // (pearson, spearman) of per-query gaps
};

/// Tradeoff curve, gap-difference series, and random/all-at-one baselines for one
/// metric.
EvaluationReport evaluate(std::span<const double> scores, const std::vector<QuerySample>& samples,
                          const std::string& metric, std::uint64_t seed, const std::string& pair_name = "");

/// Curve under metric_eval plus Pearson/Spearman between per-query gaps under
/// the two metrics.
EvaluationReport cross_metric_report(std::span<const double> scores, const std::vector<QuerySample>& samples,
                                     const std::string& metric_train, const std::string& metric_eval,
                                     std::uint64_t seed, const std::string& pair_name = "");

std::string report_to_json(const EvaluationReport& r);
/// Header: threshold,cost_advantage_pct,quality_drop_pct
std::string curve_to_csv(const std::vector<TradeoffPoint>& points);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace hybridroute
