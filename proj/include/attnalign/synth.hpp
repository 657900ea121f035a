#pragma once

// Synthetic utterances with known word boundaries, for testing the aligner
// without a model. One planted "ideal" head attends each character within its
// true frame span; every other head is a distractor of one of the kinds below.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "attnalign/dtw_align.hpp"
#include "attnalign/types.hpp"

namespace attnalign {

enum class DistractorKind {
    Uniform,  // 1/T everywhere
    Noise,    // independent random distribution per row
    Shifted,  // ideal bump moved by a per-row random offset (>= 3 frames)
    Repeated, // two bumps per row, displaced before and after the true span
    Blurry,   // ideal convolved with a wide, slightly delayed window
};

std::string_view distractor_name(DistractorKind kind);

struct DistractorMix {
    std::size_t uniform = 10;
    std::size_t noise = 11;
    std::size_t shifted = 0;
    std::size_t repeated = 0;
    std::size_t blurry = 10;

    std::size_t total() const { return uniform + noise + shifted + repeated + blurry; }
};

struct IntRange {
    std::size_t min = 0;
    std::size_t max = 0;
};

struct RealRange {
    double min = 0.0;
    double max = 0.0;
};

struct SynthConfig {
    std::uint64_t rng_seed = 0;
    IntRange num_words{4, 10};
    IntRange word_chars{2, 8};
    double frame_duration = 0.02; // seconds
    RealRange chars_per_second{10.0, 16.0};
    double ideal_sharpness = 12.0; // >= 1; infinity gives one-hot rows
    DistractorMix distractors;
    std::size_t num_layers = 4;
    std::size_t heads_per_layer = 8;
    IntRange word_gap_frames{0, 3};
    IntRange leading_silence_frames{0, 4};
    IntRange shift_frames{3, 8}; // offsets used by Shifted and Repeated
    IntRange blur_frames{10, 20};   // half-width of the Blurry window
    IntRange blur_lag_frames{2, 3}; // delay of the Blurry window centre
};

struct SynthUtterance {
    AttentionDump dump;
    std::vector<WordSegment> truth;
    HeadId ideal_head;
    // True inclusive frame span of every token row.
    std::vector<FrameSpan> token_spans;
};

// Throws DomainError when the configuration cannot be realized.
void check_config(const SynthConfig& config);

// Seed of utterance `index`: splitmix64(rng_seed ^ splitmix64(index)).
std::uint64_t utterance_seed(std::uint64_t rng_seed, std::uint64_t index);

SynthUtterance generate_one(const SynthConfig& config, std::size_t index);
std::vector<SynthUtterance> generate(const SynthConfig& config, std::size_t count);

// Exhaustive minimum over all monotone paths. Paths with equal totals are
// ranked by their steps read from the end, diagonal before horizontal before
// vertical, which matches dtw()'s backtrace.
inline constexpr std::size_t kBruteForceMaxRows = 6;
inline constexpr std::size_t kBruteForceMaxCols = 9;
DtwResult brute_force_dtw(const Matrix& cost);

} // namespace attnalign
