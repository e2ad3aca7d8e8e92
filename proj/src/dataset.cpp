#include "hybridroute/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "hybridroute/errors.hpp"
#include "hybridroute/random.hpp"
#include "json.hpp"

namespace hybridroute {

using nlohmann::json;

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    throw SchemaError("unknown split '" + std::string(s) + "'");
}

const std::vector<double>& QuerySample::small_values(const std::string& metric) const {
    auto it = small.find(metric);
    if (it == small.end()) throw SchemaError("sample '" + id + "' has no small-model metric '" + metric + "'");
    return it->second;
}

const std::vector<double>& QuerySample::large_values(const std::string& metric) const {
    auto it = large.find(metric);
    if (it == large.end()) throw SchemaError("sample '" + id + "' has no large-model metric '" + metric + "'");
    return it->second;
}

namespace {

QualityTable parse_quality(const json& j, const char* side, std::size_t line) {
    if (!j.is_object()) throw ParseError(std::string("'") + side + "' must be an object", line);
    QualityTable table;
    for (const auto& [metric, values] : j.items()) {
        if (!values.is_array()) throw ParseError(std::string(side) + "." + metric + " must be an array", line);
        std::vector<double> out;
        out.reserve(values.size());
        for (const auto& v : values) {
            if (!v.is_number()) throw ParseError(std::string(side) + "." + metric + " holds a non-number", line);
            out.push_back(v.get<double>());
        }
        table.emplace(metric, std::move(out));
    }
    return table;
}

QuerySample parse_record(const json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError("record is not an object", line);
    for (const char* key : {"id", "query_text", "split", "small", "large"}) {
        if (!j.contains(key)) throw ParseError(std::string("missing required key '") + key + "'", line);
    }
    QuerySample s;
    if (!j["id"].is_string()) throw ParseError("'id' must be a string", line);
    if (!j["query_text"].is_string()) throw ParseError("'query_text' must be a string", line);
    if (!j["split"].is_string()) throw ParseError("'split' must be a string", line);
    s.id = j["id"].get<std::string>();
    s.query_text = j["query_text"].get<std::string>();
    try {
        s.split = parse_split(j["split"].get<std::string>());
    } catch (const SchemaError& e) {
        throw ParseError(e.what(), line);
    }
    s.small = parse_quality(j["small"], "small", line);
    s.large = parse_quality(j["large"], "large", line);
    if (j.contains("embedding") && !j["embedding"].is_null()) {
        const auto& e = j["embedding"];
        if (!e.is_array()) throw ParseError("'embedding' must be an array", line);
        std::vector<double> emb;
        emb.reserve(e.size());
        for (const auto& v : e) {
            if (!v.is_number()) throw ParseError("'embedding' holds a non-number", line);
            emb.push_back(v.get<double>());
        }
        s.embedding = std::move(emb);
    }
    return s;
}

void check_quality(const QuerySample& s, const QualityTable& table, const char* side) {
    for (const auto& [metric, values] : table) {
        if (values.empty())
            throw SchemaError("sample '" + s.id + "': " + side + "." + metric + " is empty");
        for (double v : values) {
            if (!std::isfinite(v))
                throw SchemaError("sample '" + s.id + "': " + side + "." + metric + " holds a non-finite value");
        }
    }
}

}  // namespace

void validate(const Dataset& d) {
    std::unordered_set<std::string> seen;
    for (const auto& s : d.samples) {
        if (!seen.insert(s.id).second) throw SchemaError("duplicate id '" + s.id + "'");
        check_quality(s, s.small, "small");
        check_quality(s, s.large, "large");
        for (const auto& [metric, _] : s.small) {
            if (!s.large.contains(metric))
                throw SchemaError("sample '" + s.id + "': metric '" + metric + "' present for small but not large");
        }
        for (const auto& [metric, _] : s.large) {
            if (!s.small.contains(metric))
                throw SchemaError("sample '" + s.id + "': metric '" + metric + "' present for large but not small");
        }
        for (const auto& metric : d.declared_metrics) {
            if (!s.small.contains(metric) || !s.large.contains(metric))
                throw SchemaError("sample '" + s.id + "' is missing metric '" + metric + "'");
        }
        if (s.embedding) {
            for (double v : *s.embedding) {
                if (!std::isfinite(v)) throw SchemaError("sample '" + s.id + "': non-finite embedding value");
            }
            if (d.embedding_dim && s.embedding->size() != *d.embedding_dim)
                throw SchemaError("sample '" + s.id + "': embedding length " + std::to_string(s.embedding->size()) +
                                  " != declared " + std::to_string(*d.embedding_dim));
        }
    }
}

Dataset parse_dataset(std::string_view text, const std::optional<std::set<std::string>>& expected_metrics) {
    Dataset d;
    bool metrics_declared = false;
    bool first = true;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            if (end == text.size()) break;
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (j.is_object() && j.contains("meta")) {
            if (!first) throw ParseError("'meta' header must be the first record", line_no);
            first = false;
            const auto& meta = j["meta"];
            if (!meta.is_object()) throw ParseError("'meta' must be an object", line_no);
            if (meta.contains("embedding_dim") && !meta["embedding_dim"].is_null()) {
                if (!meta["embedding_dim"].is_number_unsigned() || meta["embedding_dim"].get<std::size_t>() == 0)
                    throw ParseError("'embedding_dim' must be a positive integer", line_no);
                d.embedding_dim = meta["embedding_dim"].get<std::size_t>();
            }
            if (meta.contains("metrics")) {
                if (!meta["metrics"].is_array()) throw ParseError("'metrics' must be an array", line_no);
                for (const auto& m : meta["metrics"]) {
                    if (!m.is_string()) throw ParseError("'metrics' entries must be strings", line_no);
                    d.declared_metrics.insert(m.get<std::string>());
                }
                metrics_declared = true;
            }
            continue;
        }
        first = false;
        d.samples.push_back(parse_record(j, line_no));
        if (end == text.size()) break;
    }
    if (expected_metrics) {
        d.declared_metrics.insert(expected_metrics->begin(), expected_metrics->end());
        metrics_declared = true;
    }
    if (!metrics_declared && !d.samples.empty()) {
        for (const auto& [metric, _] : d.samples.front().small) d.declared_metrics.insert(metric);
    }
    if (!d.embedding_dim) {
        for (const auto& s : d.samples) {
            if (s.embedding) {
                d.embedding_dim = s.embedding->size();
                break;
            }
        }
    }
    validate(d);
    return d;
}

Dataset load_dataset(const std::filesystem::path& path, const std::optional<std::set<std::string>>& expected_metrics) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open dataset '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), expected_metrics);
}

std::string serialize_dataset(const Dataset& d) {
    std::string out;
    json meta = json::object();
    if (d.embedding_dim) meta["embedding_dim"] = *d.embedding_dim;
    meta["metrics"] = json::array();
    for (const auto& m : d.declared_metrics) meta["metrics"].push_back(m);
    out += json{{"meta", meta}}.dump();
    out += '\n';
    for (const auto& s : d.samples) {
        json j;
        j["id"] = s.id;
        j["query_text"] = s.query_text;
        j["split"] = std::string(to_string(s.split));
        j["small"] = s.small;
        j["large"] = s.large;
        if (s.embedding) j["embedding"] = *s.embedding;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write dataset '" + path.string() + "'");
    out << serialize_dataset(d);
}

std::vector<QuerySample> split_view(const Dataset& d, Split s) {
    std::vector<QuerySample> out;
    for (const auto& sample : d.samples) {
        if (sample.split == s) out.push_back(sample);
    }
    return out;
}

std::vector<QuerySample> subsample(const std::vector<QuerySample>& samples, std::size_t n, std::uint64_t seed) {
    if (n >= samples.size()) return samples;
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    shuffle(idx, rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<QuerySample> out;
    out.reserve(n);
    for (auto i : idx) out.push_back(samples[i]);
    return out;
}

}  // namespace hybridroute
