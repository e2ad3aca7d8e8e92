#include "hybridroute/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "hybridroute/errors.hpp"
#include "hybridroute/kernels.hpp"
#include "hybridroute/labeling.hpp"
#include "json.hpp"

namespace hybridroute {

namespace {

double mean_of(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

std::vector<Target> targets_in_sample_order(const std::vector<RoutingDecision>& routing,
                                            const std::vector<QuerySample>& samples) {
    std::unordered_map<std::string, Target> by_id;
    by_id.reserve(routing.size());
    for (const auto& d : routing) {
        if (!by_id.emplace(d.query_id, d.target).second)
            throw InputError("duplicate routing decision for '" + d.query_id + "'");
    }
    if (by_id.size() != samples.size())
        throw InputError("routing covers " + std::to_string(by_id.size()) + " queries, expected " +
                         std::to_string(samples.size()));
    std::vector<Target> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        auto it = by_id.find(s.id);
        if (it == by_id.end()) throw InputError("no routing decision for '" + s.id + "'");
        out.push_back(it->second);
    }
    return out;
}

std::vector<double> gaps(const std::vector<QuerySample>& samples, const std::string& metric) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(estimate_gap(s, metric).mean_gap);
    return out;
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

MeanStderr mean_stderr(const std::vector<double>& v) {
    if (v.empty()) return {};
    const double m = mean_of(v);
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return {m, sd / std::sqrt(static_cast<double>(v.size()))};
}

}  // namespace

QualityMeans quality_means(const std::vector<QuerySample>& samples, const std::string& metric) {
    QualityMeans out;
    out.small.reserve(samples.size());
    out.large.reserve(samples.size());
    for (const auto& s : samples) {
        try {
            out.small.push_back(mean_of(s.small_values(metric)));
            out.large.push_back(mean_of(s.large_values(metric)));
        } catch (const SchemaError& e) {
            throw InputError(e.what());
        }
    }
    return out;
}

double mean_quality(const std::vector<RoutingDecision>& routing, const std::vector<QuerySample>& samples,
                    const std::string& metric) {
    if (samples.empty()) throw InputError("mean_quality: no samples");
    const auto targets = targets_in_sample_order(routing, samples);
    const QualityMeans means = quality_means(samples, metric);
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        sum += targets[i] == Target::small ? means.small[i] : means.large[i];
    }
    return sum / static_cast<double>(samples.size());
}

double quality_drop_pct(double routed_mean, double all_large_mean) {
    if (all_large_mean == 0.0) throw DomainError("quality drop is undefined for an all-at-large mean of 0");
    return 100.0 * (all_large_mean - routed_mean) / std::abs(all_large_mean);
}

double cost_advantage_pct(const std::vector<RoutingDecision>& routing) {
    if (routing.empty()) throw InputError("cost_advantage_pct: empty routing");
    const auto small = std::count_if(routing.begin(), routing.end(),
                                     [](const RoutingDecision& d) { return d.target == Target::small; });
    return 100.0 * static_cast<double>(small) / static_cast<double>(routing.size());
}

std::vector<TradeoffPoint> tradeoff_curve(std::span<const double> scores, const std::vector<QuerySample>& samples,
                                          const std::string& metric) {
    if (scores.size() != samples.size()) throw InputError("tradeoff_curve: scores not aligned with samples");
    if (samples.empty()) throw InputError("tradeoff_curve: no samples");
    std::vector<double> thresholds = midpoint_thresholds(scores);
    std::reverse(thresholds.begin(), thresholds.end());
    const QualityMeans means = quality_means(samples, metric);
    const double n = static_cast<double>(samples.size());
    double large_sum = 0.0;
    for (double q : means.large) large_sum += q;
    const double all_large_mean = large_sum / n;

    std::vector<kernels::SweepPoint> sweep(thresholds.size());
    kernels::omp::routed_quality_sweep(scores, means.small, means.large, thresholds, sweep);
    std::vector<TradeoffPoint> out;
    out.reserve(thresholds.size());
    for (std::size_t g = 0; g < thresholds.size(); ++g) {
        out.push_back({thresholds[g], 100.0 * static_cast<double>(sweep[g].routed_small) / n,
                       quality_drop_pct(sweep[g].quality_sum / n, all_large_mean)});
    }
    return out;
}

double drop_at_cost_advantage(const std::vector<TradeoffPoint>& curve, double cost_advantage_pct) {
    if (curve.empty()) throw InputError("drop_at_cost_advantage: empty curve");
    if (cost_advantage_pct <= curve.front().cost_advantage_pct) return curve.front().quality_drop_pct;
    if (cost_advantage_pct >= curve.back().cost_advantage_pct) return curve.back().quality_drop_pct;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto& a = curve[i - 1];
        const auto& b = curve[i];
        if (cost_advantage_pct <= b.cost_advantage_pct) {
            if (b.cost_advantage_pct == a.cost_advantage_pct) return b.quality_drop_pct;
            const double w = (cost_advantage_pct - a.cost_advantage_pct) / (b.cost_advantage_pct - a.cost_advantage_pct);
            return a.quality_drop_pct + w * (b.quality_drop_pct - a.quality_drop_pct);
        }
    }
    return curve.back().quality_drop_pct;
}

std::optional<double> gap_difference(const std::vector<RoutingDecision>& routing,
                                     const std::vector<QuerySample>& samples, const std::string& metric) {
    const auto targets = targets_in_sample_order(routing, samples);
    double small_sum = 0.0;
    double large_sum = 0.0;
    std::size_t small_n = 0;
    std::size_t large_n = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double g = estimate_gap(samples[i], metric).mean_gap;
        if (targets[i] == Target::small) {
            small_sum += g;
            ++small_n;
        } else {
            large_sum += g;
            ++large_n;
        }
    }
    if (small_n == 0 || large_n == 0) return std::nullopt;
    return small_sum / static_cast<double>(small_n) - large_sum / static_cast<double>(large_n);
}

double threshold_for_cost_advantage(std::span<const double> scores, double cost_advantage_pct) {
    if (scores.empty()) throw InputError("threshold_for_cost_advantage: no scores");
    const auto thresholds = midpoint_thresholds(scores);
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(scores.size());
    double best_th = kAboveMaxThreshold;
    double best_dist = std::numeric_limits<double>::infinity();
    double best_ca = 0.0;
    for (double th : thresholds) {
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), th);
        const double ca = 100.0 * static_cast<double>(above) / n;
        const double dist = std::abs(ca - cost_advantage_pct);
        if (dist < best_dist || (dist == best_dist && ca < best_ca)) {
            best_dist = dist;
            best_th = th;
            best_ca = ca;
        }
    }
    return best_th;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("pearson: length mismatch");
    if (a.size() < 2) throw InputError("pearson: need at least two points");
    const double n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw DomainError("correlation is undefined for a zero-variance input");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        // Positions i..j (0-based) share the average of ranks i+1..j+1.
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("spearman: length mismatch");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

RandomBaselinePoint random_baseline(const std::vector<QuerySample>& samples, const std::string& metric,
                                    double p_large, std::uint64_t base_seed, int seeds) {
    if (samples.empty()) throw InputError("random_baseline: no samples");
    const QualityMeans means = quality_means(samples, metric);
    const auto gap = gaps(samples, metric);
    const double n = static_cast<double>(samples.size());
    double large_sum = 0.0;
    for (double q : means.large) large_sum += q;
    const double all_large_mean = large_sum / n;

    std::vector<double> cas;
    std::vector<double> drops;
    std::vector<double> gds;
    for (int s = 0; s < seeds; ++s) {
        auto policy = RoutingPolicy::random(p_large, base_seed + static_cast<std::uint64_t>(s));
        double sum = 0.0;
        std::size_t small_n = 0;
        double gs = 0.0;
        double gl = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (policy.decide(std::nullopt) == Target::small) {
                sum += means.small[i];
                gs += gap[i];
                ++small_n;
            } else {
                sum += means.large[i];
                gl += gap[i];
            }
        }
        cas.push_back(100.0 * static_cast<double>(small_n) / n);
        drops.push_back(quality_drop_pct(sum / n, all_large_mean));
        if (small_n > 0 && small_n < samples.size()) {
            gds.push_back(gs / static_cast<double>(small_n) - gl / static_cast<double>(samples.size() - small_n));
        }
    }
    RandomBaselinePoint p;
    p.p_large = p_large;
    p.cost_advantage_pct = mean_of(cas);
    const auto d = mean_stderr(drops);
    p.quality_drop_pct = d.mean;
    p.quality_drop_stderr = d.stderr_;
    const auto g = mean_stderr(gds);
    p.gap_difference = g.mean;
    p.gap_difference_stderr = g.stderr_;
    return p;
}

EvaluationReport evaluate(std::span<const double> scores, const std::vector<QuerySample>& samples,
                          const std::string& metric, std::uint64_t seed, const std::string& pair_name) {
    EvaluationReport r;
    r.pair_name = pair_name;
    r.metric = metric;
    r.train_metric = metric;
    r.points = tradeoff_curve(scores, samples, metric);
    r.all_large_drop_pct = r.points.front().quality_drop_pct;
    r.all_small_drop_pct = r.points.back().quality_drop_pct;

    // Gap difference along the curve: the small-routed set at each threshold
    // is a prefix of the queries sorted by descending score.
    const auto gap = gaps(samples, metric);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
    double total = 0.0;
    for (double g : gap) total += g;
    std::vector<double> prefix(order.size() + 1, 0.0);
    for (std::size_t k = 0; k < order.size(); ++k) prefix[k + 1] = prefix[k] + gap[order[k]];
    const std::size_t n = samples.size();
    for (const auto& p : r.points) {
        const auto k = static_cast<std::size_t>(std::llround(p.cost_advantage_pct * static_cast<double>(n) / 100.0));
        if (k == 0 || k == n) continue;
        const double small_mean = prefix[k] / static_cast<double>(k);
        const double large_mean = (total - prefix[k]) / static_cast<double>(n - k);
        r.gap_difference.push_back({p.cost_advantage_pct, small_mean - large_mean});
    }

    for (int step = 0; step <= 10; ++step) {
        const double p_large = 1.0 - static_cast<double>(step) / 10.0;
        r.random_curve.push_back(random_baseline(samples, metric, p_large, seed + 1000003ULL * step));
    }
    return r;
}

EvaluationReport cross_metric_report(std::span<const double> scores, const std::vector<QuerySample>& samples,
                                     const std::string& metric_train, const std::string& metric_eval,
                                     std::uint64_t seed, const std::string& pair_name) {
    EvaluationReport r = evaluate(scores, samples, metric_eval, seed, pair_name);
    r.train_metric = metric_train;
    const auto a = gaps(samples, metric_train);
    const auto b = gaps(samples, metric_eval);
    try {
        r.correlations = std::make_pair(pearson(a, b), spearman(a, b));
    } catch (const DomainError&) {
        r.correlations.reset();
    }
    return r;
}

std::string report_to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["pair_name"] = r.pair_name;
    j["metric"] = r.metric;
    j["train_metric"] = r.train_metric;
    j["points"] = nlohmann::ordered_json::array();
    for (const auto& p : r.points) {
        j["points"].push_back({{"threshold", p.threshold},
                               {"cost_advantage_pct", p.cost_advantage_pct},
                               {"quality_drop_pct", p.quality_drop_pct}});
    }
    j["gap_difference"] = nlohmann::ordered_json::array();
    for (const auto& g : r.gap_difference) {
        j["gap_difference"].push_back({{"cost_advantage_pct", g.cost_advantage_pct}, {"gap_difference", g.gap_difference}});
    }
    nlohmann::ordered_json b;
    b["all_small_drop_pct"] = r.all_small_drop_pct;
    b["all_large_drop_pct"] = r.all_large_drop_pct;
    b["random_curve"] = nlohmann::ordered_json::array();
    for (const auto& p : r.random_curve) {
        nlohmann::ordered_json q;
        q["p_large"] = p.p_large;
        q["cost_advantage_pct"] = p.cost_advantage_pct;
        q["quality_drop_pct"] = p.quality_drop_pct;
        q["quality_drop_stderr"] = p.quality_drop_stderr;
        q["gap_difference"] = p.gap_difference;
        q["gap_difference_stderr"] = p.gap_difference_stderr;
        b["random_curve"].push_back(q);
    }
    j["baselines"] = b;
    if (r.correlations) {
        j["correlations"] = {{"pearson", r.correlations->first}, {"spearman", r.correlations->second}};
    } else {
        j["correlations"] = nullptr;
    }
    return j.dump(2) + "\n";
}

std::string curve_to_csv(const std::vector<TradeoffPoint>& points) {
    std::string out = "threshold,cost_advantage_pct,quality_drop_pct\n";
    char buf[128];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.cost_advantage_pct, p.quality_drop_pct);
        out += buf;
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << content;
}

}  // namespace hybridroute
