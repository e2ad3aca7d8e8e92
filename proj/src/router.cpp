#include "hybridroute/router.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "hybridroute/errors.hpp"
#include "hybridroute/kernels.hpp"
#include "hybridroute/random.hpp"
#include "json.hpp"

namespace hybridroute {

using nlohmann::json;
using nlohmann::ordered_json;

RouterModel RouterModel::zeros(const FeaturizerConfig& cfg) {
    validate(cfg);
    RouterModel m;
    m.featurizer = cfg;
    m.weights.assign(cfg.dim, 0.0);
    return m;
}

const CalibrationEntry* RouterModel::find_threshold(const std::string& metric,
                                                    std::optional<double> max_drop_pct) const {
    const CalibrationEntry* found = nullptr;
    for (const auto& e : thresholds) {
        if (e.metric != metric) continue;
        if (max_drop_pct) {
            if (e.max_drop_pct == *max_drop_pct) return &e;
            continue;
        }
        if (found != nullptr) return nullptr;
        found = &e;
    }
    return found;
}

void RouterModel::set_threshold(const CalibrationEntry& entry) {
    for (auto& e : thresholds) {
        if (e.metric == entry.metric && e.max_drop_pct == entry.max_drop_pct) {
            e = entry;
            return;
        }
    }
    thresholds.push_back(entry);
}

double score(const RouterModel& m, const FeatureVector& features) {
    if (features.dim != m.weights.size())
        throw InputError("feature length " + std::to_string(features.dim) + " != model dim " +
                         std::to_string(m.weights.size()));
    return kernels::sigmoid(kernels::dot(m.weights, features) + m.bias);
}

double score(const RouterModel& m, std::span<const double> dense_features) {
    if (dense_features.size() != m.weights.size())
        throw InputError("feature length " + std::to_string(dense_features.size()) + " != model dim " +
                         std::to_string(m.weights.size()));
    double z = 0.0;
    for (std::size_t j = 0; j < dense_features.size(); ++j) z += m.weights[j] * dense_features[j];
    return kernels::sigmoid(z + m.bias);
}

std::vector<double> score_all(const RouterModel& m, const std::vector<QuerySample>& samples) {
    std::vector<FeatureVector> features;
    features.reserve(samples.size());
    for (const auto& s : samples) {
        features.push_back(featurize(m.featurizer, s));
        if (features.back().dim != m.weights.size()) throw InputError("featurizer dim != model dim");
    }
    std::vector<double> out(samples.size());
    kernels::omp::scores(m.weights, m.bias, features, out);
    return out;
}

double bce_loss(std::span<const double> predictions, std::span<const double> labels) {
    if (predictions.size() != labels.size()) throw InputError("bce_loss: length mismatch");
    if (predictions.empty()) throw InputError("bce_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = std::clamp(predictions[i], kernels::kBceEpsilon, 1.0 - kernels::kBceEpsilon);
        const double y = labels[i];
        acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return -acc / static_cast<double>(predictions.size());
}

void attach_features(std::vector<LabeledExample>& examples, const std::vector<QuerySample>& samples,
                     const FeaturizerConfig& cfg) {
    if (examples.size() != samples.size()) throw InputError("attach_features: size mismatch");
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].query_id != samples[i].id)
            throw InputError("attach_features: example '" + examples[i].query_id + "' does not match sample '" +
                             samples[i].id + "'");
        examples[i].features = featurize(cfg, samples[i]);
    }
}

namespace {

void check_examples(std::span<const LabeledExample> examples, std::size_t dim, const char* what) {
    for (const auto& e : examples) {
        if (e.features.dim != dim)
            throw InputError(std::string(what) + " example '" + e.query_id + "' has feature dim " +
                             std::to_string(e.features.dim) + ", expected " + std::to_string(dim));
        if (!(e.label >= 0.0 && e.label <= 1.0))
            throw InputError(std::string(what) + " example '" + e.query_id + "' has label outside [0,1]");
    }
}

struct Batch {
    std::vector<FeatureVector> features;
    std::vector<double> labels;
};

double objective_value(std::span<const double> weights, double bias, std::span<const LabeledExample> examples,
                       double l2) {
    double loss = 0.0;
    for (const auto& e : examples) {
        const double raw = kernels::sigmoid(kernels::dot(weights, e.features) + bias);
        const double p = std::clamp(raw, kernels::kBceEpsilon, 1.0 - kernels::kBceEpsilon);
        loss += -(e.label * std::log(p) + (1.0 - e.label) * std::log(1.0 - p));
    }
    double norm2 = 0.0;
    for (double w : weights) norm2 += w * w;
    return loss / static_cast<double>(examples.size()) + l2 * norm2;
}

double validation_bce(const RouterModel& m, std::span<const LabeledExample> validation) {
    std::vector<double> preds;
    std::vector<double> labels;
    preds.reserve(validation.size());
    for (const auto& e : validation) {
        preds.push_back(kernels::sigmoid(kernels::dot(m.weights, e.features) + m.bias));
        labels.push_back(e.label);
    }
    return bce_loss(preds, labels);
}

}  // namespace

double training_objective(const RouterModel& m, std::span<const LabeledExample> examples, double l2) {
    if (examples.empty()) throw InputError("training_objective: no examples");
    check_examples(examples, m.weights.size(), "training");
    return objective_value(m.weights, m.bias, examples, l2);
}

RouterModel train(std::span<const LabeledExample> examples, const FeaturizerConfig& cfg, const TrainHyper& hyper,
                  const LabelScheme& scheme, std::span<const LabeledExample> validation) {
    if (examples.empty()) throw InputError("train: no examples");
    if (hyper.epochs < 0) throw InputError("train: epochs must be >= 0");
    if (hyper.batch_size == 0) throw InputError("train: batch_size must be >= 1");
    if (!(hyper.learning_rate > 0.0) || !std::isfinite(hyper.learning_rate))
        throw InputError("train: learning rate must be positive");
    if (!(hyper.l2 >= 0.0)) throw InputError("train: l2 must be >= 0");
    RouterModel m = RouterModel::zeros(cfg);
    check_examples(examples, cfg.dim, "training");
    check_examples(validation, cfg.dim, "validation");
    m.scheme = scheme;
    m.meta.epochs = hyper.epochs;
    m.meta.learning_rate = hyper.learning_rate;
    m.meta.l2 = hyper.l2;
    m.meta.batch_size = hyper.batch_size;
    m.meta.seed = hyper.seed;

    const bool select = hyper.select_checkpoint && !validation.empty();
    RouterModel best = m;
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(hyper.seed);
    std::vector<double> grad;
    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        shuffle(order, rng);
        const double lr = hyper.learning_rate / std::sqrt(static_cast<double>(epoch));
        const double shrink = 1.0 - 2.0 * lr * hyper.l2;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + hyper.batch_size);
            const auto bsz = static_cast<double>(end - start);
            double loss = 0.0;
            double grad_b = 0.0;
            // Residuals first, then the update, so the whole batch sees the same weights.
            std::vector<double> residual(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const auto& e = examples[order[k]];
                const double raw = kernels::sigmoid(kernels::dot(m.weights, e.features) + m.bias);
                const double p = std::clamp(raw, kernels::kBceEpsilon, 1.0 - kernels::kBceEpsilon);
                loss += -(e.label * std::log(p) + (1.0 - e.label) * std::log(1.0 - p));
                const bool clamped = raw <= kernels::kBceEpsilon || raw >= 1.0 - kernels::kBceEpsilon;
                residual[k - start] = clamped ? 0.0 : p - e.label;
                grad_b += residual[k - start];
            }
            if (!std::isfinite(loss)) throw TrainingError("non-finite loss", epoch, batch_index);
            if (hyper.l2 > 0.0) {
                for (double& w : m.weights) w *= shrink;
            }
            for (std::size_t k = start; k < end; ++k) {
                const auto& x = examples[order[k]].features;
                const double r = lr * residual[k - start] / bsz;
                for (std::size_t j = 0; j < x.index.size(); ++j) m.weights[x.index[j]] -= r * x.value[j];
            }
            m.bias -= lr * grad_b / bsz;
            if (!std::isfinite(m.bias)) throw TrainingError("non-finite bias", epoch, batch_index);
        }
        if (select) {
            const double val = validation_bce(m, validation);
            if (val < best_val) {
                best_val = val;
                best = m;
                best.meta.selected_epoch = epoch;
            }
        }
    }
    if (select && best.meta.selected_epoch) m = std::move(best);
    double grad_b = 0.0;
    std::vector<double> labels;
    std::vector<FeatureVector> features;
    labels.reserve(examples.size());
    features.reserve(examples.size());
    for (const auto& e : examples) {
        labels.push_back(e.label);
        features.push_back(e.features);
    }
    m.meta.final_loss = kernels::omp::bce_objective(m.weights, m.bias, features, labels, hyper.l2, grad, grad_b);
    if (!std::isfinite(m.meta.final_loss)) throw TrainingError("non-finite final loss", hyper.epochs, 0);
    return m;
}

double gradient_check(std::span<const LabeledExample> examples, const RouterModel& m, double h) {
    if (examples.empty()) throw InputError("gradient_check: no examples");
    if (!(h > 0.0)) throw InputError("gradient_check: h must be > 0");
    check_examples(examples, m.weights.size(), "gradient-check");
    const double l2 = m.meta.l2;
    std::vector<double> labels;
    std::vector<FeatureVector> features;
    for (const auto& e : examples) {
        labels.push_back(e.label);
        features.push_back(e.features);
    }
    std::vector<double> grad_w;
    double grad_b = 0.0;
    kernels::serial::bce_objective(m.weights, m.bias, features, labels, l2, grad_w, grad_b);

    // Small models are checked on every coordinate; for wide hashed models
    // only the coordinates touched by some example are perturbed.
    std::vector<std::size_t> coords;
    if (m.weights.size() <= 4096) {
        coords.resize(m.weights.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
        std::set<std::size_t> active;
        for (const auto& x : features) active.insert(x.index.begin(), x.index.end());
        coords.assign(active.begin(), active.end());
    }
    auto rel = [](double analytic, double numeric) {
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        return std::abs(analytic - numeric) / denom;
    };
    std::vector<double> w = m.weights;
    double worst = 0.0;
    for (std::size_t j : coords) {
        const double orig = w[j];
        w[j] = orig + h;
        const double up = objective_value(w, m.bias, examples, l2);
        w[j] = orig - h;
        const double down = objective_value(w, m.bias, examples, l2);
        w[j] = orig;
        worst = std::max(worst, rel(grad_w[j], (up - down) / (2.0 * h)));
    }
    const double up = objective_value(w, m.bias + h, examples, l2);
    const double down = objective_value(w, m.bias - h, examples, l2);
    worst = std::max(worst, rel(grad_b, (up - down) / (2.0 * h)));
    return worst;
}

namespace {

ordered_json to_json(const CalibrationEntry& e) {
    ordered_json j;
    j["metric"] = e.metric;
    j["max_drop_pct"] = e.max_drop_pct;
    j["threshold"] = e.threshold;
    j["achieved_drop_pct"] = e.achieved_drop_pct;
    j["achieved_cost_advantage_pct"] = e.achieved_cost_advantage_pct;
    j["feasible"] = e.feasible;
    j["val_samples"] = e.val_samples;
    j["seed"] = e.seed;
    return j;
}

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw SchemaError(std::string("model artifact: missing key '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model artifact: bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

std::string serialize_model(const RouterModel& m) {
    ordered_json j;
    j["format"] = kModelFormat;
    ordered_json f;
    f["kind"] = std::string(to_string(m.featurizer.kind));
    f["dim"] = m.featurizer.dim;
    f["ngram_range"] = {m.featurizer.ngram_min, m.featurizer.ngram_max};
    f["hash_seed"] = m.featurizer.hash_seed;
    f["lowercase"] = m.featurizer.lowercase;
    j["featurizer"] = f;
    j["scheme"] = {{"kind", std::string(to_string(m.scheme.kind))}, {"t", m.scheme.t}};
    ordered_json meta;
    meta["epochs"] = m.meta.epochs;
    meta["learning_rate"] = m.meta.learning_rate;
    meta["l2"] = m.meta.l2;
    meta["batch_size"] = m.meta.batch_size;
    meta["seed"] = m.meta.seed;
    meta["final_loss"] = m.meta.final_loss;
    meta["selected_epoch"] = m.meta.selected_epoch ? ordered_json(*m.meta.selected_epoch) : ordered_json(nullptr);
    meta["metric"] = m.meta.metric;
    j["training_meta"] = meta;
    j["thresholds"] = ordered_json::array();
    for (const auto& e : m.thresholds) j["thresholds"].push_back(to_json(e));
    j["bias"] = m.bias;
    j["weights"] = m.weights;
    return j.dump() + "\n";
}

RouterModel parse_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("model artifact: malformed JSON: ") + e.what());
    }
    if (!j.is_object() || required<std::string>(j, "format") != kModelFormat)
        throw SchemaError(std::string("model artifact: expected format '") + kModelFormat + "'");
    RouterModel m;
    const auto& f = j.at("featurizer");
    m.featurizer.kind = parse_featurizer_kind(required<std::string>(f, "kind"));
    m.featurizer.dim = required<std::size_t>(f, "dim");
    const auto range = required<std::vector<int>>(f, "ngram_range");
    if (range.size() != 2) throw SchemaError("model artifact: ngram_range must have two entries");
    m.featurizer.ngram_min = range[0];
    m.featurizer.ngram_max = range[1];
    m.featurizer.hash_seed = required<std::uint64_t>(f, "hash_seed");
    m.featurizer.lowercase = required<bool>(f, "lowercase");
    try {
        validate(m.featurizer);
    } catch (const InputError& e) {
        throw SchemaError(std::string("model artifact: ") + e.what());
    }
    const auto& s = j.at("scheme");
    m.scheme.kind = parse_label_kind(required<std::string>(s, "kind"));
    m.scheme.t = required<double>(s, "t");
    const auto& meta = j.at("training_meta");
    m.meta.epochs = required<int>(meta, "epochs");
    m.meta.learning_rate = required<double>(meta, "learning_rate");
    m.meta.l2 = required<double>(meta, "l2");
    m.meta.batch_size = required<std::size_t>(meta, "batch_size");
    m.meta.seed = required<std::uint64_t>(meta, "seed");
    m.meta.final_loss = required<double>(meta, "final_loss");
    if (meta.contains("selected_epoch") && !meta["selected_epoch"].is_null())
        m.meta.selected_epoch = meta["selected_epoch"].get<int>();
    m.meta.metric = meta.value("metric", std::string{});
    for (const auto& e : j.value("thresholds", json::array())) {
        CalibrationEntry c;
        c.metric = required<std::string>(e, "metric");
        c.max_drop_pct = required<double>(e, "max_drop_pct");
        c.threshold = required<double>(e, "threshold");
        c.achieved_drop_pct = required<double>(e, "achieved_drop_pct");
        c.achieved_cost_advantage_pct = required<double>(e, "achieved_cost_advantage_pct");
        c.feasible = required<bool>(e, "feasible");
        c.val_samples = required<std::size_t>(e, "val_samples");
        c.seed = required<std::uint64_t>(e, "seed");
        m.thresholds.push_back(std::move(c));
    }
    m.bias = required<double>(j, "bias");
    m.weights = required<std::vector<double>>(j, "weights");
    if (m.weights.size() != m.featurizer.dim)
        throw SchemaError("model artifact: weights length " + std::to_string(m.weights.size()) +
                          " != featurizer dim " + std::to_string(m.featurizer.dim));
    if (!std::isfinite(m.bias) || !std::all_of(m.weights.begin(), m.weights.end(), [](double w) { return std::isfinite(w); }))
        throw SchemaError("model artifact: non-finite parameter");
    return m;
}

void save_model(const RouterModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write model '" + path.string() + "'");
    out << serialize_model(m);
}

RouterModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

}  // namespace hybridroute
