#include "hybridroute/synth.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "hybridroute/errors.hpp"
#include "hybridroute/random.hpp"

namespace hybridroute {

std::string_view to_string(SynthPreset p) {
    switch (p) {
        case SynthPreset::separable: return "separable";
        case SynthPreset::gap_correlated: return "gap_correlated";
        case SynthPreset::symmetric_random: return "symmetric_random";
    }
    return "separable";
}

SynthPreset parse_synth_preset(std::string_view s) {
    if (s == "separable") return SynthPreset::separable;
    if (s == "gap_correlated") return SynthPreset::gap_correlated;
    if (s == "symmetric_random") return SynthPreset::symmetric_random;
    throw InputError("unknown synth preset '" + std::string(s) + "'");
}

namespace {

constexpr std::size_t kVocabulary = 300;
constexpr int kLevels = 20;

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::string filler_text(Rng& rng, std::size_t min_words, std::size_t max_words) {
    const auto count = min_words + uniform_index(rng, max_words - min_words + 1);
    std::string text;
    char word[16];
    for (std::size_t i = 0; i < count; ++i) {
        std::snprintf(word, sizeof word, "w%03llu", static_cast<unsigned long long>(uniform_index(rng, kVocabulary)));
        if (!text.empty()) text += ' ';
        text += word;
    }
    return text;
}

std::string insert_token(Rng& rng, const std::string& text, const std::string& token) {
    std::vector<std::string> words;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find(' ', pos);
        if (end == std::string::npos) end = text.size();
        words.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    const auto at = uniform_index(rng, words.size() + 1);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), token);
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

// The secondary metric tracks the primary one per sample on a different
// scale, plus independent noise.
std::vector<double> alternate_metric(Rng& rng, const std::vector<double>& bart, double base) {
    std::vector<double> out;
    out.reserve(bart.size());
    for (double q : bart) out.push_back(6.0 + 2.0 * (q - base) + 0.3 * standard_normal(rng));
    return out;
}

}  // namespace

Dataset synth(SynthPreset preset, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InputError("synth: n must be >= 1");
    Rng rng(seed);
    Dataset d;
    d.embedding_dim = kSynthEmbeddingDim;
    d.declared_metrics = {"bart_score", "gpt4_score"};

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(order, rng);
    std::vector<Split> splits(n, Split::test);
    const std::size_t n_train = std::max<std::size_t>(1, n * 6 / 10);
    const std::size_t n_val = n * 2 / 10;
    for (std::size_t k = 0; k < n; ++k) {
        splits[order[k]] = k < n_train ? Split::train : (k < n_train + n_val ? Split::validation : Split::test);
    }

    const int width = static_cast<int>(std::to_string(n - 1).size());
    d.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        QuerySample q;
        char id[32];
        std::snprintf(id, sizeof id, "q%0*llu", width, static_cast<unsigned long long>(i));
        q.id = id;
        q.split = splits[i];
        const double base = -3.0 + 0.3 * standard_normal(rng);
        std::vector<double> small(kSynthSamplesPerSide);
        std::vector<double> large(kSynthSamplesPerSide);
        std::string text = filler_text(rng, 4, 8);
        double signal = 0.0;
        switch (preset) {
            case SynthPreset::separable: {
                const bool marked = uniform01(rng) < 0.4;
                signal = marked ? 1.0 : 0.0;
                if (marked) text = insert_token(rng, text, kSynthMarkerToken);
                // Disjoint ranges: every small sample beats (marked) or loses
                // to (unmarked) every large sample.
                for (auto& s : small) s = marked ? base + uniform(rng, 0.05, 0.15) : base + uniform(rng, -0.35, -0.25);
                for (auto& l : large) l = base + uniform(rng, -0.05, 0.05);
                break;
            }
            case SynthPreset::gap_correlated: {
                const double z = uniform01(rng);
                signal = z;
                const int level = std::min(kLevels - 1, static_cast<int>(z * kLevels));
                text = insert_token(rng, text, "lvl" + std::to_string(level));
                const double gap = -3.2 + 3.4 * z;
                for (auto& s : small) s = base + gap + 0.25 * standard_normal(rng);
                for (auto& l : large) l = base + 0.25 * standard_normal(rng);
                break;
            }
            case SynthPreset::symmetric_random: {
                for (auto& s : small) s = base + 0.3 * standard_normal(rng);
                for (auto& l : large) l = base + 0.3 * standard_normal(rng);
                signal = standard_normal(rng);
                break;
            }
        }
        q.query_text = std::move(text);
        std::vector<double> emb(kSynthEmbeddingDim);
        emb[0] = signal;
        for (std::size_t k = 1; k < emb.size(); ++k) emb[k] = standard_normal(rng);
        q.embedding = std::move(emb);
        q.small["gpt4_score"] = alternate_metric(rng, small, base);
        q.large["gpt4_score"] = alternate_metric(rng, large, base);
        q.small["bart_score"] = std::move(small);
        q.large["bart_score"] = std::move(large);
        d.samples.push_back(std::move(q));
    }
    validate(d);
    return d;
}

}  // namespace hybridroute
