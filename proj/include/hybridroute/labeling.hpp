#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hybridroute/dataset.hpp"
#include "hybridroute/features.hpp"

namespace hybridroute {

enum class LabelKind { deterministic, probabilistic, transformed };

std::string_view to_string(LabelKind k);
/// Accepts both the long names and the CLI short forms det/prob/trans.
LabelKind parse_label_kind(std::string_view s);

struct LabelScheme {
    LabelKind kind = LabelKind::probabilistic;
    double t = 0.0;  // relaxation offset; only meaningful for transformed

    static LabelScheme deterministic() { return {LabelKind::deterministic, 0.0}; }
    static LabelScheme probabilistic() { return {LabelKind::probabilistic, 0.0}; }
    static LabelScheme transformed(double t) { return {LabelKind::transformed, t}; }

    bool operator==(const LabelScheme&) const = default;
};

struct LabeledExample {
    std::string query_id;
    double label = 0.0;
    FeatureVector features;  // filled by attach_features before training
};

/// Quality gap summary of one query: all-pairs mean of q_small - q_large.
struct GapEstimate {
    std::string query_id;
    double mean_gap = 0.0;
};

/// Hard label: 1 iff q_small >= q_large.
int label_det(double q_small, double q_large);

/// Fraction of all |s|*|l| cross pairs with s_i >= l_j.
double label_prob(std::span<const double> small, std::span<const double> large);

/// Fraction of all cross pairs with s_i >= l_j - t, t >= 0.
double label_trans(std::span<const double> small, std::span<const double> large, double t);

double mean_gap(std::span<const double> small, std::span<const double> large);
GapEstimate estimate_gap(const QuerySample& q, const std::string& metric);

/// Mean absolute difference over all N^2 ordered label pairs (self pairs
/// included). Computed in O(N log N) from the sorted labels.
double transform_objective(std::span<const double> labels);

struct TStarResult {
    double t_star = 0.0;
    std::vector<std::pair<double, double>> curve;  // (t, objective)
};

/// Grid search for the relaxation offset. Ties resolve to the smallest t.
TStarResult find_t_star(const std::vector<QuerySample>& train, const std::string& metric,
                        std::span<const double> grid);

/// 64 evenly spaced points on [0, p95 of (q_large - q_small)] over all
/// training cross pairs. A non-positive upper end collapses to {0}.
std::vector<double> default_t_grid(const std::vector<QuerySample>& train, const std::string& metric,
                                   std::size_t points = 64);

std::vector<LabeledExample> build_labels(const std::vector<QuerySample>& train, const std::string& metric,
                                         const LabelScheme& scheme);

/// One JSON record per line: {"query_id","scheme","t","label"}.
std::string serialize_labels(const std::vector<LabeledExample>& labels, const LabelScheme& scheme);
void save_labels(const std::vector<LabeledExample>& labels, const LabelScheme& scheme,
                 const std::filesystem::path& path);

}  // namespace hybridroute
