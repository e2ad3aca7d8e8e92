#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hybridroute/errors.hpp"
#include "hybridroute/labeling.hpp"
#include "hybridroute/synth.hpp"

using namespace hybridroute;

TEST_CASE("synth is deterministic and well formed") {
    for (auto preset : {SynthPreset::separable, SynthPreset::gap_correlated, SynthPreset::symmetric_random}) {
        CAPTURE(to_string(preset));
        const Dataset a = synth(preset, 500, 3);
        CHECK(serialize_dataset(a) == serialize_dataset(synth(preset, 500, 3)));
        CHECK(serialize_dataset(a) != serialize_dataset(synth(preset, 500, 4)));
        CHECK(a.samples.size() == 500);
        CHECK(a.embedding_dim == kSynthEmbeddingDim);
        CHECK_NOTHROW(validate(a));
        CHECK(split_view(a, Split::train).size() == 300);
        CHECK(split_view(a, Split::validation).size() == 100);
        CHECK(split_view(a, Split::test).size() == 100);
        for (const auto& q : a.samples) {
            CHECK(q.small_values("bart_score").size() == kSynthSamplesPerSide);
            CHECK(q.large_values("gpt4_score").size() == kSynthSamplesPerSide);
            CHECK(q.embedding->size() == kSynthEmbeddingDim);
        }
        CHECK(parse_synth_preset(to_string(preset)) == preset);
    }
    CHECK_THROWS(parse_synth_preset("nope"));
}

TEST_CASE("separable preset plants the marker") {
    const Dataset d = synth(SynthPreset::separable, 1000, 1);
    int marked = 0;
    for (const auto& q : d.samples) {
        const bool m = q.query_text.find(kSynthMarkerToken) != std::string::npos;
        marked += m;
        const double y = label_prob(q.small_values("bart_score"), q.large_values("bart_score"));
        CHECK(y == (m ? 1.0 : 0.0));
    }
    CHECK(std::abs(marked / 1000.0 - 0.4) < 0.05);
}

TEST_CASE("gap_correlated preset has mostly small-loses labels") {
    const Dataset d = synth(SynthPreset::gap_correlated, 2000, 1);
    int above_half = 0;
    for (const auto& q : d.samples) {
        above_half += label_prob(q.small_values("bart_score"), q.large_values("bart_score")) > 0.5;
    }
    CHECK(above_half / 2000.0 < 0.15);
}

TEST_CASE("symmetric_random preset centres labels at one half") {
    const Dataset d = synth(SynthPreset::symmetric_random, 2000, 1);
    double sum = 0.0;
    for (const auto& q : d.samples) sum += label_prob(q.small_values("bart_score"), q.large_values("bart_score"));
    CHECK(std::abs(sum / 2000.0 - 0.5) < 0.03);
}
