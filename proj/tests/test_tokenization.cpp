#include <doctest.h>

#include <random>
#include <sstream>

#include "attnalign/tokenization.hpp"

using namespace attnalign;

namespace {

std::vector<std::string> texts(const Tokenization& t) {
    std::vector<std::string> out;
    for (const auto& tok : t.tokens) {
        out.push_back(tok.text);
    }
    return out;
}

std::vector<std::size_t> indices(const Tokenization& t) {
    std::vector<std::size_t> out;
    for (const auto& tok : t.tokens) {
        out.push_back(*tok.word_index);
    }
    return out;
}

} // namespace

TEST_SUITE("tokenization") {

TEST_CASE("characters with spaces carrying the following word") {
    const auto t = to_characters({"She", "had"});
    CHECK(t.granularity == Granularity::Character);
    CHECK(texts(t) == std::vector<std::string>{"S", "h", "e", " ", "h", "a", "d"});
    CHECK(indices(t) == std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 1});
}

TEST_CASE("single word has no space token") {
    const auto t = to_characters({"a"});
    CHECK(texts(t) == std::vector<std::string>{"a"});
    CHECK(indices(t) == std::vector<std::size_t>{0});
}

TEST_CASE("two words have exactly one separator") {
    const auto t = to_characters({"dark", "suit"});
    CHECK(t.tokens.size() == 9);
    std::size_t spaces = 0;
    for (const auto& tok : t.tokens) {
        spaces += tok.is_space() ? 1 : 0;
    }
    CHECK(spaces == 1);
}

TEST_CASE("multi-byte characters stay whole") {
    const auto t = to_characters({"né", "ü"});
    CHECK(texts(t) == std::vector<std::string>{"n", "é", " ", "ü"});
}

TEST_CASE("invalid character inputs") {
    CHECK_THROWS_AS(to_characters({}), DomainError);
    CHECK_THROWS_AS(to_characters({"a", ""}), DomainError);
    CHECK_THROWS_AS(to_characters({"a b"}), DomainError);
}

TEST_CASE("punctuation stripping keeps intra-word apostrophes") {
    const auto s = strip_punctuation({"don't,", "stop."});
    CHECK(s.words == std::vector<std::string>{"don't", "stop"});
    CHECK(s.drop_map == std::vector<std::optional<std::size_t>>{0, 1});
}

TEST_CASE("all-punctuation words are dropped") {
    const auto s = strip_punctuation({"..."});
    CHECK(s.words.empty());
    CHECK(s.drop_map == std::vector<std::optional<std::size_t>>{std::nullopt});
    const auto m = strip_punctuation({"a", "--", "b"});
    CHECK(m.words == std::vector<std::string>{"a", "b"});
    CHECK(m.drop_map == std::vector<std::optional<std::size_t>>{0, std::nullopt, 1});
}

TEST_CASE("plain words are untouched") {
    CHECK(strip_punctuation({"cat"}).words == std::vector<std::string>{"cat"});
}

TEST_CASE("apostrophe edge cases") {
    CHECK(strip_word_punctuation("'tis") == "tis");
    CHECK(strip_word_punctuation("dogs'") == "dogs");
    CHECK(strip_word_punctuation("rock'n'roll") == "rock'n'roll");
    CHECK(strip_word_punctuation("l’homme") == "l’homme");
    CHECK(strip_word_punctuation("«quoi?»") == "quoi");
    CHECK(strip_word_punctuation("e-mail") == "email");
}

TEST_CASE("lowercasing is Unicode-aware") {
    CHECK(to_lower("ÉCOLE Straße") == "école straße");
    CHECK(normalize_for_matching("Suit.") == "suit");
}

TEST_CASE("grouping uses first and last non-space tokens") {
    const auto t = to_characters({"She"});
    const std::vector<FrameSpan> spans{{0, 2}, {3, 4}, {5, 9}};
    const auto w = group_tokens_to_words(t, spans, 0.02);
    REQUIRE(w.size() == 1);
    CHECK(w[0].word == "She");
    CHECK(w[0].start == doctest::Approx(0.0));
    CHECK(w[0].end == doctest::Approx(0.20));
}

TEST_CASE("one-frame token") {
    const auto t = to_characters({"w"});
    const std::vector<FrameSpan> spans{{5, 5}};
    const auto w = group_tokens_to_words(t, spans, 0.02);
    CHECK(w[0].start == doctest::Approx(0.10));
    CHECK(w[0].end == doctest::Approx(0.12));
}

TEST_CASE("space spans do not move boundaries") {
    const auto t = to_characters({"ab", "c"});
    std::vector<FrameSpan> spans{{0, 1}, {2, 3}, {4, 9}, {10, 11}};
    const auto a = group_tokens_to_words(t, spans, 0.02);
    spans[2] = {3, 10};
    const auto b = group_tokens_to_words(t, spans, 0.02);
    CHECK(a == b);
    CHECK(a[0].end == doctest::Approx(0.08));
    CHECK(a[1].start == doctest::Approx(0.20));
}

TEST_CASE("span count mismatch is a domain error") {
    const auto t = to_characters({"ab"});
    const std::vector<FrameSpan> spans{{0, 1}};
    CHECK_THROWS_AS(group_tokens_to_words(t, spans, 0.02), DomainError);
}

TEST_CASE("words are rebuilt from a token table") {
    std::vector<TokenRecord> recs = {{"<|sot|>", kNoWord}, {"S", 0}, {"he", 0}, {" ", 1}, {"had", 1}};
    const auto t = tokenization_from_records(recs, Granularity::Wordpiece);
    CHECK(t.words == std::vector<std::string>{"She", "had"});
    CHECK(t.tokens.size() == 5);
    std::vector<TokenRecord> skip = {{"a", 0}, {"b", 2}};
    CHECK_THROWS_AS(tokenization_from_records(skip, Granularity::Character), DomainError);
}

TEST_CASE("property: character tokens reconstruct the word list") {
    std::mt19937_64 rng(3);
    const std::vector<std::string> alphabet = {"a", "b", "z", "é", "ß", "'", "ж", "中"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> words(std::uniform_int_distribution<int>(1, 6)(rng));
        for (auto& w : words) {
            const int n = std::uniform_int_distribution<int>(1, 5)(rng);
            for (int i = 0; i < n; ++i) {
                w += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
            }
        }
        const auto t = to_characters(words);
        std::string joined;
        for (const auto& tok : t.tokens) {
            joined += tok.text;
        }
        std::vector<std::string> split;
        std::istringstream ss(joined);
        for (std::string w; std::getline(ss, w, ' ');) {
            split.push_back(w);
        }
        CHECK(split == words);
        CHECK(tokenization_from_records(t.tokens, Granularity::Character).words == words);
    }
}

} // TEST_SUITE
