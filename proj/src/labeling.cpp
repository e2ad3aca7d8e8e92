#include "hybridroute/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hybridroute/errors.hpp"
#include "hybridroute/kernels.hpp"
#include "json.hpp"

namespace hybridroute {

std::string_view to_string(LabelKind k) {
    switch (k) {
        case LabelKind::deterministic: return "deterministic";
        case LabelKind::probabilistic: return "probabilistic";
        case LabelKind::transformed: return "transformed";
    }
    return "probabilistic";
}

LabelKind parse_label_kind(std::string_view s) {
    if (s == "det" || s == "deterministic") return LabelKind::deterministic;
    if (s == "prob" || s == "probabilistic") return LabelKind::probabilistic;
    if (s == "trans" || s == "transformed") return LabelKind::transformed;
    throw InputError("unknown label scheme '" + std::string(s) + "'");
}

namespace {

void require_finite(std::span<const double> v, const char* what) {
    if (v.empty()) throw DomainError(std::string(what) + " samples are empty");
    for (double x : v) {
        if (!std::isfinite(x)) throw DomainError(std::string(what) + " samples hold a non-finite value");
    }
}

}  // namespace

int label_det(double q_small, double q_large) {
    if (!std::isfinite(q_small) || !std::isfinite(q_large)) throw DomainError("label_det: non-finite quality");
    return q_small >= q_large ? 1 : 0;
}

double label_trans(std::span<const double> small, std::span<const double> large, double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("relaxation offset t must be finite and >= 0");
    require_finite(small, "small");
    require_finite(large, "large");
    std::size_t hits = 0;
    for (double s : small) {
        for (double l : large) {
            if (s >= l - t) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(small.size() * large.size());
}

double label_prob(std::span<const double> small, std::span<const double> large) {
    return label_trans(small, large, 0.0);
}

double mean_gap(std::span<const double> small, std::span<const double> large) {
    require_finite(small, "small");
    require_finite(large, "large");
    // The all-pairs mean of s_i - l_j factors into mean(s) - mean(l).
    double s_sum = 0.0;
    for (double s : small) s_sum += s;
    double l_sum = 0.0;
    for (double l : large) l_sum += l;
    return s_sum / static_cast<double>(small.size()) - l_sum / static_cast<double>(large.size());
}

GapEstimate estimate_gap(const QuerySample& q, const std::string& metric) {
    return {q.id, mean_gap(q.small_values(metric), q.large_values(metric))};
}

double transform_objective(std::span<const double> labels) {
    if (labels.empty()) throw DomainError("transform_objective: empty label list");
    std::vector<double> sorted(labels.begin(), labels.end());
    std::sort(sorted.begin(), sorted.end());
    // sum_{i,j} |y_i - y_j| = 2 * sum_k y_(k) * (2k - N + 1) over ascending order.
    const auto n = static_cast<double>(sorted.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        acc += sorted[k] * (2.0 * static_cast<double>(k) - n + 1.0);
    }
    return 2.0 * acc / (n * n);
}

namespace {

std::vector<kernels::SamplePair> sample_pairs(const std::vector<QuerySample>& train, const std::string& metric) {
    std::vector<kernels::SamplePair> pairs;
    pairs.reserve(train.size());
    for (const auto& q : train) {
        const auto& s = q.small_values(metric);
        const auto& l = q.large_values(metric);
        require_finite(s, "small");
        require_finite(l, "large");
        pairs.push_back({s, l});
    }
    return pairs;
}

}  // namespace

TStarResult find_t_star(const std::vector<QuerySample>& train, const std::string& metric,
                        std::span<const double> grid) {
    if (grid.empty()) throw DomainError("find_t_star: empty grid");
    if (train.empty()) throw DomainError("find_t_star: empty training set");
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (!(grid[g] >= 0.0) || !std::isfinite(grid[g])) throw DomainError("find_t_star: grid values must be >= 0");
        if (g > 0 && grid[g] < grid[g - 1]) throw DomainError("find_t_star: grid must be sorted ascending");
    }
    const auto pairs = sample_pairs(train, metric);
    std::vector<double> labels(pairs.size());
    TStarResult result;
    result.curve.reserve(grid.size());
    double best = -1.0;
    for (double t : grid) {
        kernels::omp::transformed_labels(pairs, t, labels);
        const double obj = transform_objective(labels);
        result.curve.emplace_back(t, obj);
        if (obj > best) {
            best = obj;
            result.t_star = t;
        }
    }
    return result;
}

std::vector<double> default_t_grid(const std::vector<QuerySample>& train, const std::string& metric,
                                   std::size_t points) {
    std::vector<double> diffs;
    for (const auto& q : train) {
        for (double s : q.small_values(metric)) {
            for (double l : q.large_values(metric)) diffs.push_back(l - s);
        }
    }
    std::vector<double> grid;
    if (diffs.empty() || points < 2) return {0.0};
    // Linear interpolation between order statistics.
    std::sort(diffs.begin(), diffs.end());
    const double pos = 0.95 * static_cast<double>(diffs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, diffs.size() - 1);
    const double p95 = diffs[lo] + (pos - static_cast<double>(lo)) * (diffs[hi] - diffs[lo]);
    if (!(p95 > 0.0)) return {0.0};
    grid.reserve(points);
    for (std::size_t k = 0; k < points; ++k) {
        grid.push_back(p95 * static_cast<double>(k) / static_cast<double>(points - 1));
    }
    return grid;
}

std::vector<LabeledExample> build_labels(const std::vector<QuerySample>& train, const std::string& metric,
                                         const LabelScheme& scheme) {
    if (!(scheme.t >= 0.0)) throw DomainError("label scheme offset t must be >= 0");
    std::vector<LabeledExample> out;
    out.reserve(train.size());
    if (scheme.kind == LabelKind::deterministic) {
        for (const auto& q : train) {
            const auto& s = q.small_values(metric);
            const auto& l = q.large_values(metric);
            require_finite(s, "small");
            require_finite(l, "large");
            out.push_back({q.id, static_cast<double>(label_det(s.front(), l.front())), {}});
        }
        return out;
    }
    const double t = scheme.kind == LabelKind::transformed ? scheme.t : 0.0;
    const auto pairs = sample_pairs(train, metric);
    std::vector<double> labels(pairs.size());
    kernels::omp::transformed_labels(pairs, t, labels);
    for (std::size_t i = 0; i < train.size(); ++i) out.push_back({train[i].id, labels[i], {}});
    return out;
}

std::string serialize_labels(const std::vector<LabeledExample>& labels, const LabelScheme& scheme) {
    std::string out;
    for (const auto& e : labels) {
        nlohmann::ordered_json j;
        j["query_id"] = e.query_id;
        j["scheme"] = std::string(to_string(scheme.kind));
        j["t"] = scheme.kind == LabelKind::transformed ? scheme.t : 0.0;
        j["label"] = e.label;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_labels(const std::vector<LabeledExample>& labels, const LabelScheme& scheme,
                 const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write labels '" + path.string() + "'");
    out << serialize_labels(labels, scheme);
}

}  // namespace hybridroute
