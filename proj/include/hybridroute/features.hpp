#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridroute/dataset.hpp"

namespace hybridroute {

/// Sparse real vector of fixed logical dimension. Indices are strictly
/// increasing; dense embeddings are stored with every index present.
struct FeatureVector {
    std::size_t dim = 0;
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    std::size_t nnz() const noexcept { return index.size(); }
    std::vector<double> to_dense() const;
    static FeatureVector from_dense(std::span<const double> dense);

    bool operator==(const FeatureVector&) const = default;
};

enum class FeaturizerKind { hashed_ngrams, external_embedding };

std::string_view to_string(FeaturizerKind k);
FeaturizerKind parse_featurizer_kind(std::string_view s);

struct FeaturizerConfig {
    FeaturizerKind kind = FeaturizerKind::hashed_ngrams;
    std::size_t dim = std::size_t{1} << 18;
    int ngram_min = 1;
    int ngram_max = 2;
    std::uint64_t hash_seed = 0;
    bool lowercase = true;

    bool operator==(const FeaturizerConfig&) const = default;
};

/// Throws InputError on dim == 0 or an invalid n-gram range.
void validate(const FeaturizerConfig& cfg);

/// Splits on anything that is not an ASCII letter or digit; non-ASCII bytes
/// are kept as part of tokens.
std::vector<std::string> tokenize(std::string_view text, bool lowercase);

/// Signed-hash bag of word n-grams, L2-normalised when non-zero.
FeatureVector hash_features(const FeaturizerConfig& cfg, std::string_view text);

/// Dispatches on cfg.kind. external_embedding requires a stored embedding of
/// length cfg.dim.
FeatureVector featurize(const FeaturizerConfig& cfg, const QuerySample& q);

/// Featurize from raw request fields (used by the gateway).
FeatureVector featurize(const FeaturizerConfig& cfg, std::string_view query_text,
                        const std::vector<double>* embedding);

}  // namespace hybridroute
