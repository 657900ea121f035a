#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnalign/types.hpp"

namespace attnalign {

enum class Granularity { Wordpiece, Character };

struct Tokenization {
    Granularity granularity = Granularity::Character;
    std::vector<TokenRecord> tokens;
    std::vector<std::string> words;
};

// Inclusive frame range attended by one token.
struct FrameSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const FrameSpan&, const FrameSpan&) = default;
};

struct StrippedWords {
    std::vector<std::string> words;
    // Old word index -> new index, or nullopt when the word was all punctuation.
    std::vector<std::optional<std::size_t>> drop_map;
};

// Unicode scalars of a UTF-8 string, one string per scalar. Invalid sequences
// are passed through byte by byte.
std::vector<std::string> split_utf8(std::string_view text);

// Removes unicode punctuation (general category P*) except apostrophes that
// sit between two kept characters, so contractions survive.
std::string strip_word_punctuation(std::string_view word);
StrippedWords strip_punctuation(const std::vector<std::string>& words);

// Simple (1:1) unicode lowercase mapping.
std::string to_lower(std::string_view text);

// Identity key used when matching hypothesis and reference words.
std::string normalize_for_matching(std::string_view word);

// Characters of the words joined by single space tokens. A space token carries
// the index of the word that follows it.
Tokenization to_characters(const std::vector<std::string>& words);

// Rebuilds the word list from a token table whose word indices were filled in
// by the exporter. Throws DomainError if a word index is skipped.
Tokenization tokenization_from_records(std::vector<TokenRecord> tokens, Granularity granularity);

// One segment per word: start = first non-space token's start frame, end =
// last non-space token's end frame + 1, both scaled by frame_duration.
std::vector<WordSegment> group_tokens_to_words(const Tokenization& tok,
                                               std::span<const FrameSpan> token_spans,
                                               double frame_duration);

} // namespace attnalign
