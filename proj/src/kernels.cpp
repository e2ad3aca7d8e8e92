#include "hybridroute/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hybridroute::kernels {

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

double sigmoid(double z) {
    static const double lo = std::nextafter(0.0, 1.0);
    static const double hi = std::nextafter(1.0, 0.0);
    double p;
    if (z >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        p = e / (1.0 + e);
    }
    return std::clamp(p, lo, hi);
}

double dot(std::span<const double> weights, const FeatureVector& x) {
    double z = 0.0;
    for (std::size_t k = 0; k < x.index.size(); ++k) z += weights[x.index[k]] * x.value[k];
    return z;
}

namespace {

double pair_fraction(const SamplePair& q, double t) {
    std::size_t hits = 0;
    for (double s : q.small) {
        for (double l : q.large) {
            if (s >= l - t) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(q.small.size() * q.large.size());
}

double chosen_sum(std::span<const double> scores, std::span<const double> small_means,
                  std::span<const double> large_means, double threshold, std::size_t& routed_small) {
    double sum = 0.0;
    routed_small = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > threshold) {
            sum += small_means[i];
            ++routed_small;
        } else {
            sum += large_means[i];
        }
    }
    return sum;
}

struct ExampleTerm {
    double loss;
    double residual;  // d loss / d z
};

ExampleTerm bce_term(double z, double y) {
    const double raw = sigmoid(z);
    const double p = std::clamp(raw, kBceEpsilon, 1.0 - kBceEpsilon);
    const double loss = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    const bool clamped = raw <= kBceEpsilon || raw >= 1.0 - kBceEpsilon;
    return {loss, clamped ? 0.0 : p - y};
}

double finish_objective(std::span<const double> weights, std::span<const FeatureVector> features,
                        std::span<const ExampleTerm> terms, double l2, std::vector<double>& grad_w,
                        double& grad_b) {
    const double n = static_cast<double>(features.size());
    grad_w.assign(weights.size(), 0.0);
    grad_b = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        loss += terms[i].loss;
        grad_b += terms[i].residual;
        const auto& x = features[i];
        for (std::size_t k = 0; k < x.index.size(); ++k) grad_w[x.index[k]] += terms[i].residual * x.value[k];
    }
    double norm2 = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        grad_w[j] = grad_w[j] / n + 2.0 * l2 * weights[j];
        norm2 += weights[j] * weights[j];
    }
    grad_b /= n;
    return loss / n + l2 * norm2;
}

}  // namespace

namespace serial {

void transformed_labels(std::span<const SamplePair> queries, double t, std::span<double> out) {
    for (std::size_t i = 0; i < queries.size(); ++i) out[i] = pair_fraction(queries[i], t);
}

void scores(std::span<const double> weights, double bias, std::span<const FeatureVector> features,
            std::span<double> out) {
    for (std::size_t i = 0; i < features.size(); ++i) out[i] = sigmoid(dot(weights, features[i]) + bias);
}

void routed_quality_sweep(std::span<const double> scores, std::span<const double> small_means,
                          std::span<const double> large_means, std::span<const double> thresholds,
                          std::span<SweepPoint> out) {
    for (std::size_t g = 0; g < thresholds.size(); ++g) {
        out[g].quality_sum = chosen_sum(scores, small_means, large_means, thresholds[g], out[g].routed_small);
    }
}

double bce_objective(std::span<const double> weights, double bias, std::span<const FeatureVector> features,
                     std::span<const double> labels, double l2, std::vector<double>& grad_w, double& grad_b) {
    std::vector<ExampleTerm> terms(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) terms[i] = bce_term(dot(weights, features[i]) + bias, labels[i]);
    return finish_objective(weights, features, terms, l2, grad_w, grad_b);
}

}  // namespace serial

namespace omp {

void transformed_labels(std::span<const SamplePair> queries, double t, std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = pair_fraction(queries[i], t);
}

void scores(std::span<const double> weights, double bias, std::span<const FeatureVector> features,
            std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(features.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = sigmoid(dot(weights, features[i]) + bias);
}

void routed_quality_sweep(std::span<const double> scores, std::span<const double> small_means,
                          std::span<const double> large_means, std::span<const double> thresholds,
                          std::span<SweepPoint> out) {
    const auto g_count = static_cast<std::ptrdiff_t>(thresholds.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t g = 0; g < g_count; ++g) {
        out[g].quality_sum = chosen_sum(scores, small_means, large_means, thresholds[g], out[g].routed_small);
    }
}

double bce_objective(std::span<const double> weights, double bias, std::span<const FeatureVector> features,
                     std::span<const double> labels, double l2, std::vector<double>& grad_w, double& grad_b) {
    std::vector<ExampleTerm> terms(features.size());
    const auto n = static_cast<std::ptrdiff_t>(features.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) terms[i] = bce_term(dot(weights, features[i]) + bias, labels[i]);
    return finish_objective(weights, features, terms, l2, grad_w, grad_b);
}

}  // namespace omp

}  // namespace hybridroute::kernels
