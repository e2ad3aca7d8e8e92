#include "hybridroute/policy.hpp"

#include <algorithm>
#include <cmath>

#include "hybridroute/errors.hpp"
#include "hybridroute/evaluation.hpp"
#include "hybridroute/kernels.hpp"

namespace hybridroute {

std::string_view to_string(Target t) { return t == Target::small ? "small" : "large"; }

RoutingPolicy::RoutingPolicy(PolicyKind kind, double threshold, double p_large, std::uint64_t seed)
    : kind_(kind), threshold_(threshold), p_large_(p_large), rng_(seed) {}

RoutingPolicy RoutingPolicy::learned(double threshold) {
    if (!std::isfinite(threshold)) throw InputError("threshold must be finite");
    return RoutingPolicy(PolicyKind::learned, threshold, 0.0, 0);
}

RoutingPolicy RoutingPolicy::all_small() { return RoutingPolicy(PolicyKind::all_small, 0.0, 0.0, 0); }

RoutingPolicy RoutingPolicy::all_large() { return RoutingPolicy(PolicyKind::all_large, 0.0, 1.0, 0); }

RoutingPolicy RoutingPolicy::random(double p_large, std::uint64_t seed) {
    if (!(p_large >= 0.0 && p_large <= 1.0)) throw InputError("p_large must lie in [0,1]");
    return RoutingPolicy(PolicyKind::random, 0.0, p_large, seed);
}

Target RoutingPolicy::decide(std::optional<double> score) {
    switch (kind_) {
        case PolicyKind::learned:
            if (!score) throw InputError("learned policy requires a router score");
            return route_by_threshold(*score, threshold_);
        case PolicyKind::all_small: return Target::small;
        case PolicyKind::all_large: return Target::large;
        case PolicyKind::random: return uniform01(rng_) < p_large_ ? Target::large : Target::small;
    }
    return Target::large;
}

std::vector<RoutingDecision> route_all(const std::vector<QuerySample>& samples, std::span<const double> scores,
                                       double threshold) {
    if (samples.size() != scores.size()) throw InputError("route_all: scores not aligned with samples");
    std::vector<RoutingDecision> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out.push_back({samples[i].id, route_by_threshold(scores[i], threshold), scores[i]});
    }
    return out;
}

std::vector<double> midpoint_thresholds(std::span<const double> scores) {
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> grid;
    grid.reserve(sorted.size() + 1);
    grid.push_back(kBelowMinThreshold);
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        // Midpoint of adjacent doubles can round onto the upper one; keep the
        // lower one then, which still separates the two under strict ">".
        double mid = sorted[i - 1] + (sorted[i] - sorted[i - 1]) / 2.0;
        if (!(mid < sorted[i])) mid = sorted[i - 1];
        grid.push_back(mid);
    }
    grid.push_back(kAboveMaxThreshold);
    return grid;
}

CalibrationResult calibrate_threshold(const std::vector<QuerySample>& val, std::span<const double> scores,
                                      const std::string& metric, double max_drop_pct,
                                      std::optional<std::vector<double>> grid) {
    if (val.empty()) throw InputError("calibrate_threshold: empty validation set");
    if (val.size() != scores.size()) throw InputError("calibrate_threshold: scores not aligned with samples");
    if (std::isnan(max_drop_pct)) throw InputError("calibrate_threshold: max_drop_pct is NaN");
    const std::vector<double> thresholds = grid ? *grid : midpoint_thresholds(scores);
    if (thresholds.empty()) throw InputError("calibrate_threshold: empty threshold grid");

    const QualityMeans means = quality_means(val, metric);
    const double n = static_cast<double>(val.size());
    double large_sum = 0.0;
    for (double q : means.large) large_sum += q;
    const double all_large_mean = large_sum / n;

    std::vector<kernels::SweepPoint> sweep(thresholds.size());
    kernels::omp::routed_quality_sweep(scores, means.small, means.large, thresholds, sweep);

    CalibrationResult best;
    bool found = false;
    for (std::size_t g = 0; g < thresholds.size(); ++g) {
        const double drop = quality_drop_pct(sweep[g].quality_sum / n, all_large_mean);
        const double ca = 100.0 * static_cast<double>(sweep[g].routed_small) / n;
        if (!(drop <= max_drop_pct)) continue;
        if (!found || ca > best.achieved_cost_advantage_pct ||
            (ca == best.achieved_cost_advantage_pct && thresholds[g] > best.threshold)) {
            best = {thresholds[g], drop, ca, true};
            found = true;
        }
    }
    if (!found) return {kAboveMaxThreshold, 0.0, 0.0, false};
    return best;
}

}  // namespace hybridroute
