#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hybridroute/features.hpp"

// Data-parallel inner loops. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp; the two produce
// bit-identical output for any thread count because all floating-point
// reductions are performed in index order after the parallel phase.
namespace hybridroute::kernels {

/// Quality samples of one query for a single metric.
struct SamplePair {
    std::span<const double> small;
    std::span<const double> large;
};

/// Sufficient statistics of the routed-quality sweep at one threshold.
struct SweepPoint {
    double quality_sum = 0.0;  // sum over queries of the chosen model's mean
    std::size_t routed_small = 0;
};

void set_threads(int n);
int max_threads();

namespace serial {

void transformed_labels(std::span<const SamplePair> queries, double t, std::span<double> out);

void scores(std::span<const double> weights, double bias, std::span<const FeatureVector> features,
            std::span<double> out);

void routed_quality_sweep(std::span<const double> scores, std::span<const double> small_means,
                          std::span<const double> large_means, std::span<const double> thresholds,
                          std::span<SweepPoint> out);

/// Mean clamped BCE over the examples plus l2*||w||^2; accumulates the
/// gradient of that objective into grad_w (resized to weights.size()) and
/// grad_b.
double bce_objective(std::span<const double> weights, double bias, std::span<const FeatureVector> features,
                     std::span<const double> labels, double l2, std::vector<double>& grad_w, double& grad_b);

}  // namespace serial

namespace omp {

void transformed_labels(std::span<const SamplePair> queries, double t, std::span<double> out);

void scores(std::span<const double> weights, double bias, std::span<const FeatureVector> features,
            std::span<double> out);

void routed_quality_sweep(std::span<const double> scores, std::span<const double> small_means,
                          std::span<const double> large_means, std::span<const double> thresholds,
                          std::span<SweepPoint> out);

double bce_objective(std::span<const double> weights, double bias, std::span<const FeatureVector> features,
                     std::span<const double> labels, double l2, std::vector<double>& grad_w, double& grad_b);

}  // namespace omp

/// Sigmoid kept strictly inside (0, 1).
double sigmoid(double z);

/// Clamp used inside the cross-entropy.
inline constexpr double kBceEpsilon = 1e-7;

double dot(std::span<const double> weights, const FeatureVector& x);

}  // namespace hybridroute::kernels
