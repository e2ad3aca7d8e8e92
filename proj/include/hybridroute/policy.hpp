#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridroute/dataset.hpp"
#include "hybridroute/random.hpp"

namespace hybridroute {

enum class Target { small, large };

std::string_view to_string(Target t);

struct RoutingDecision {
    std::string query_id;
    Target target = Target::large;
    std::optional<double> score;
};

enum class PolicyKind { learned, all_small, all_large, random };

/// Routing rule. The random policy owns its generator, so decide() is
/// non-const; share a policy across threads only with external locking.
class RoutingPolicy {
public:
    static RoutingPolicy learned(double threshold);
    static RoutingPolicy all_small();
    static RoutingPolicy all_large();
    static RoutingPolicy random(double p_large, std::uint64_t seed);

    PolicyKind kind() const noexcept { return kind_; }
    double threshold() const noexcept { return threshold_; }
    double p_large() const noexcept { return p_large_; }

    /// learned: small iff score > threshold (a tie goes large).
    Target decide(std::optional<double> score);

private:
    RoutingPolicy(PolicyKind kind, double threshold, double p_large, std::uint64_t seed);

    PolicyKind kind_;
    double threshold_ = 0.0;
    double p_large_ = 0.0;
    Rng rng_;
};

/// Threshold rule shared by the policy, the evaluation sweep, and the gateway.
inline Target route_by_threshold(double score, double threshold) {
    return score > threshold ? Target::small : Target::large;
}

/// Decisions for aligned (sample, score) lists under a fixed threshold.
std::vector<RoutingDecision> route_all(const std::vector<QuerySample>& samples, std::span<const double> scores,
                                       double threshold);

/// Sentinels bracketing every possible router score, which lies in (0, 1).
inline constexpr double kBelowMinThreshold = 0.0;
inline constexpr double kAboveMaxThreshold = 1.0;

/// Sorted ascending: the below-min sentinel, midpoints between consecutive
/// distinct scores, and the above-max sentinel.
std::vector<double> midpoint_thresholds(std::span<const double> scores);

struct CalibrationResult {
    double threshold = kAboveMaxThreshold;
    double achieved_drop_pct = 0.0;
    double achieved_cost_advantage_pct = 0.0;
    bool feasible = true;  // false: nothing met the constraint, fell back to all-at-large
};

/// Grid search for the threshold with the highest cost advantage whose
/// quality drop versus all-at-large is <= max_drop_pct. Ties on cost
/// advantage go to the larger threshold.
CalibrationResult calibrate_threshold(const std::vector<QuerySample>& val, std::span<const double> scores,
                                      const std::string& metric, double max_drop_pct,
                                      std::optional<std::vector<double>> grid = std::nullopt);

inline constexpr std::size_t kDefaultCalibrationSamples = 500;

}  // namespace hybridroute
