#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hybridroute {

enum class Split { train, validation, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// Quality values q(z) of independently sampled responses, keyed by metric
/// name (e.g. "bart_score").
using QualityTable = std::map<std::string, std::vector<double>>;

struct QuerySample {
    std::string id;
    std::string query_text;
    std::optional<std::vector<double>> embedding;
    QualityTable small;
    QualityTable large;
    Split split = Split::train;

    const std::vector<double>& small_values(const std::string& metric) const;
    const std::vector<double>& large_values(const std::string& metric) const;

    bool operator==(const QuerySample&) const = default;
};

struct Dataset {
    std::vector<QuerySample> samples;
    std::optional<std::size_t> embedding_dim;
    std::set<std::string> declared_metrics;

    bool operator==(const Dataset&) const = default;
};

/// Load a newline-delimited JSON dataset. An optional first line of the form
/// {"meta": {"embedding_dim": D, "metrics": [...]}} declares the schema; when
/// neither the header nor `expected_metrics` declares metrics, the metrics of
/// the first record become the declared set.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::set<std::string>>& expected_metrics = std::nullopt);

/// Same as load_dataset, reading from an in-memory buffer.
Dataset parse_dataset(std::string_view text,
                      const std::optional<std::set<std::string>>& expected_metrics = std::nullopt);

/// Serialize with a meta header line followed by one record per line.
std::string serialize_dataset(const Dataset& d);
void save_dataset(const Dataset& d, const std::filesystem::path& path);

/// Throws SchemaError on any violated invariant.
void validate(const Dataset& d);

std::vector<QuerySample> split_view(const Dataset& d, Split s);

/// Seeded subsample of at most `n` samples without replacement; the original
/// order of the survivors is preserved.
std::vector<QuerySample> subsample(const std::vector<QuerySample>& samples, std::size_t n,
                                   std::uint64_t seed);

}  // namespace hybridroute
