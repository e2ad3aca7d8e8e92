#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "hybridroute/dataset.hpp"

namespace hybridroute {

enum class SynthPreset {
    /// A marker token flags queries whose small-model samples all dominate
    /// the large-model samples; every other query has the reverse.
    separable,
    /// A level token encodes a latent difficulty that shifts the mean gap;
    /// the small model rarely wins, so most probabilistic labels are 0.
    gap_correlated,
    /// Both models draw from the same distribution, independent of the text.
    symmetric_random,
};

std::string_view to_string(SynthPreset p);
SynthPreset parse_synth_preset(std::string_view s);

inline constexpr std::size_t kSynthSamplesPerSide = 10;
inline constexpr std::size_t kSynthEmbeddingDim = 8;
inline constexpr const char* kSynthMarkerToken = "zqxmark";

/// Metrics "bart_score" and "gpt4_score" on both sides; 60/20/20
/// train/validation/test split; embedding[0] carries the planted signal.
Dataset synth(SynthPreset preset, std::size_t n, std::uint64_t seed);

}  // namespace hybridroute
