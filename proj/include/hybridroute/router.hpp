#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybridroute/dataset.hpp"
#include "hybridroute/features.hpp"
#include "hybridroute/labeling.hpp"

namespace hybridroute {

struct TrainHyper {
    int epochs = 5;
    double learning_rate = 0.1;  // decayed as lr / sqrt(epoch)
    double l2 = 1e-6;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    /// Keep the epoch with the lowest validation BCE (needs validation data).
    bool select_checkpoint = false;
};

struct TrainingMeta {
    int epochs = 0;
    double learning_rate = 0.0;
    double l2 = 0.0;
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    std::optional<int> selected_epoch;
    std::string metric;

    bool operator==(const TrainingMeta&) const = default;
};

/// One row of the calibration table stored inside a model artifact, keyed by
/// (metric, max_drop_pct).
struct CalibrationEntry {
    std::string metric;
    double max_drop_pct = 0.0;
    double threshold = 1.0;
    double achieved_drop_pct = 0.0;
    double achieved_cost_advantage_pct = 0.0;
    bool feasible = true;
    std::size_t val_samples = 0;
    std::uint64_t seed = 0;

    bool operator==(const CalibrationEntry&) const = default;
};

struct RouterModel {
    FeaturizerConfig featurizer;
    std::vector<double> weights;
    double bias = 0.0;
    LabelScheme scheme;
    TrainingMeta meta;
    std::vector<CalibrationEntry> thresholds;

    /// Zero-initialised model (score 0.5 everywhere).
    static RouterModel zeros(const FeaturizerConfig& cfg);

    /// Lookup by metric; with no max_drop_pct the metric must have exactly
    /// one entry. Returns nullptr when absent or ambiguous.
    const CalibrationEntry* find_threshold(const std::string& metric,
                                           std::optional<double> max_drop_pct = std::nullopt) const;
    /// Insert or replace the entry with the same key.
    void set_threshold(const CalibrationEntry& entry);

    bool operator==(const RouterModel&) const = default;
};

inline constexpr const char* kModelFormat = "hybridroute.router/1";

/// sigmoid(w . x + b); throws InputError on a dimension mismatch.
double score(const RouterModel& m, const FeatureVector& features);
double score(const RouterModel& m, std::span<const double> dense_features);

std::vector<double> score_all(const RouterModel& m, const std::vector<QuerySample>& samples);

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> predictions, std::span<const double> labels);

/// Fill LabeledExample::features from the matching samples (by position).
void attach_features(std::vector<LabeledExample>& examples, const std::vector<QuerySample>& samples,
                     const FeaturizerConfig& cfg);

/// Mini-batch gradient descent on mean BCE + l2 * ||w||^2 from a zero
/// initialisation. Deterministic given hyper.seed.
RouterModel train(std::span<const LabeledExample> examples, const FeaturizerConfig& cfg, const TrainHyper& hyper,
                  const LabelScheme& scheme = {}, std::span<const LabeledExample> validation = {});

/// Objective used by train (mean clamped BCE + l2 * ||w||^2).
double training_objective(const RouterModel& m, std::span<const LabeledExample> examples, double l2);

/// Max relative error between the analytic gradient of training_objective
/// (with l2 = m.meta.l2) and central finite differences with step h.
double gradient_check(std::span<const LabeledExample> examples, const RouterModel& m, double h);

std::string serialize_model(const RouterModel& m);
RouterModel parse_model(std::string_view text);
void save_model(const RouterModel& m, const std::filesystem::path& path);
RouterModel load_model(const std::filesystem::path& path);

}  // namespace hybridroute
