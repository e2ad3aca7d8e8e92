#include "hybridroute/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "hybridroute/errors.hpp"

namespace hybridroute {

std::vector<double> FeatureVector::to_dense() const {
    std::vector<double> out(dim, 0.0);
    for (std::size_t k = 0; k < index.size(); ++k) out[index[k]] = value[k];
    return out;
}

FeatureVector FeatureVector::from_dense(std::span<const double> dense) {
    FeatureVector v;
    v.dim = dense.size();
    v.index.resize(dense.size());
    v.value.assign(dense.begin(), dense.end());
    for (std::size_t i = 0; i < dense.size(); ++i) v.index[i] = static_cast<std::uint32_t>(i);
    return v;
}

std::string_view to_string(FeaturizerKind k) {
    return k == FeaturizerKind::hashed_ngrams ? "hashed_ngrams" : "external_embedding";
}

FeaturizerKind parse_featurizer_kind(std::string_view s) {
    if (s == "hashed_ngrams" || s == "hashed") return FeaturizerKind::hashed_ngrams;
    if (s == "external_embedding" || s == "embedding") return FeaturizerKind::external_embedding;
    throw InputError("unknown featurizer '" + std::string(s) + "'");
}

void validate(const FeaturizerConfig& cfg) {
    if (cfg.dim == 0) throw InputError("featurizer dim must be >= 1");
    if (cfg.dim > (std::size_t{1} << 32)) throw InputError("featurizer dim exceeds 2^32");
    if (cfg.ngram_min < 1 || cfg.ngram_min > cfg.ngram_max || cfg.ngram_max > 3)
        throw InputError("n-gram range must satisfy 1 <= min <= max <= 3");
}

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool word = c >= 0x80 || std::isalnum(c);
        if (word) {
            cur.push_back(lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a over the n-gram bytes (tokens separated by 0x1f), seeded and then
// finalised so both bucket and sign bits are well mixed.
std::uint64_t hash_ngram(const std::vector<std::string>& tokens, std::size_t start, std::size_t len,
                         std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
    auto feed = [&h](unsigned char b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (std::size_t i = 0; i < len; ++i) {
        if (i > 0) feed(0x1f);
        for (char c : tokens[start + i]) feed(static_cast<unsigned char>(c));
    }
    feed(static_cast<unsigned char>(len));
    return mix64(h);
}

}  // namespace

FeatureVector hash_features(const FeaturizerConfig& cfg, std::string_view text) {
    validate(cfg);
    const auto tokens = tokenize(text, cfg.lowercase);
    std::map<std::uint32_t, double> acc;
    for (int n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
        const auto len = static_cast<std::size_t>(n);
        if (tokens.size() < len) break;
        for (std::size_t start = 0; start + len <= tokens.size(); ++start) {
            const std::uint64_t h = hash_ngram(tokens, start, len, cfg.hash_seed);
            const auto bucket = static_cast<std::uint32_t>((h & 0x7fffffffffffffffULL) % cfg.dim);
            acc[bucket] += (h >> 63) ? -1.0 : 1.0;
        }
    }
    FeatureVector v;
    v.dim = cfg.dim;
    double norm2 = 0.0;
    for (const auto& [bucket, x] : acc) {
        if (x == 0.0) continue;
        v.index.push_back(bucket);
        v.value.push_back(x);
        norm2 += x * x;
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v.value) x *= inv;
    }
    return v;
}

FeatureVector featurize(const FeaturizerConfig& cfg, std::string_view query_text,
                        const std::vector<double>* embedding) {
    if (cfg.kind == FeaturizerKind::hashed_ngrams) return hash_features(cfg, query_text);
    validate(cfg);
    if (embedding == nullptr) throw InputError("external_embedding featurizer requires an embedding");
    if (embedding->size() != cfg.dim)
        throw InputError("embedding length " + std::to_string(embedding->size()) + " != featurizer dim " +
                         std::to_string(cfg.dim));
    return FeatureVector::from_dense(*embedding);
}

FeatureVector featurize(const FeaturizerConfig& cfg, const QuerySample& q) {
    try {
        return featurize(cfg, q.query_text, q.embedding ? &*q.embedding : nullptr);
    } catch (const InputError& e) {
        throw InputError("sample '" + q.id + "': " + e.what());
    }
}

}  // namespace hybridroute
