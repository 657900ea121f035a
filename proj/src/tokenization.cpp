#include "attnalign/tokenization.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

namespace attnalign {

namespace {

struct Scalar {
    UChar32 cp;          // negative for an invalid byte
    std::string_view raw; // original bytes
};

std::vector<Scalar> decode(std::string_view text) {
    std::vector<Scalar> out;
    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto len = static_cast<std::int32_t>(text.size());
    std::int32_t i = 0;
    while (i < len) {
        std::int32_t begin = i;
        UChar32 c = 0;
        U8_NEXT(s, i, len, c);
        out.push_back({c, text.substr(static_cast<std::size_t>(begin),
                                      static_cast<std::size_t>(i - begin))});
    }
    return out;
}

void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    std::int32_t n = 0;
    UBool error = false;
    U8_APPEND(reinterpret_cast<std::uint8_t*>(buf), n, U8_MAX_LENGTH, c, error);
    if (!error) {
        out.append(buf, static_cast<std::size_t>(n));
    }
}

bool is_apostrophe(UChar32 c) {
    return c == U'\'' || c == U'’' || c == U'ʼ';
}

bool is_punct(UChar32 c) {
    return c >= 0 && u_ispunct(c);
}

} // namespace

std::vector<std::string> split_utf8(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& s : decode(text)) {
        out.emplace_back(s.raw);
    }
    return out;
}

std::string strip_word_punctuation(std::string_view word) {
    auto scalars = decode(word);
    std::vector<bool> keep(scalars.size());
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        keep[i] = !is_punct(scalars[i].cp);
    }
    // An apostrophe survives only with kept non-punctuation on both sides.
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (!is_apostrophe(scalars[i].cp)) {
            continue;
        }
        bool left = i > 0 && !is_punct(scalars[i - 1].cp);
        bool right = i + 1 < scalars.size() && !is_punct(scalars[i + 1].cp);
        keep[i] = left && right;
    }
    std::string out;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (keep[i]) {
            out.append(scalars[i].raw);
        }
    }
    return out;
}

StrippedWords strip_punctuation(const std::vector<std::string>& words) {
    StrippedWords result;
    result.drop_map.reserve(words.size());
    for (const auto& w : words) {
        auto stripped = strip_word_punctuation(w);
        if (stripped.empty()) {
            result.drop_map.push_back(std::nullopt);
        } else {
            result.drop_map.push_back(result.words.size());
            result.words.push_back(std::move(stripped));
        }
    }
    return result;
}

std::string to_lower(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (const auto& s : decode(text)) {
        if (s.cp < 0) {
            out.append(s.raw);
        } else {
            append_utf8(out, u_tolower(s.cp));
        }
    }
    return out;
}

std::string normalize_for_matching(std::string_view word) {
    return to_lower(strip_word_punctuation(word));
}

Tokenization to_characters(const std::vector<std::string>& words) {
    if (words.empty()) {
        throw DomainError("to_characters: empty word list");
    }
    Tokenization tok;
    tok.granularity = Granularity::Character;
    tok.words = words;
    for (std::size_t w = 0; w < words.size(); ++w) {
        if (words[w].empty()) {
            throw DomainError("to_characters: word " + std::to_string(w) + " is empty");
        }
        if (w > 0) {
            tok.tokens.push_back({" ", w});
        }
        for (auto& ch : split_utf8(words[w])) {
            if (ch == " ") {
                throw DomainError("to_characters: word " + std::to_string(w) + " contains a space");
            }
            tok.tokens.push_back({std::move(ch), w});
        }
    }
    return tok;
}

Tokenization tokenization_from_records(std::vector<TokenRecord> tokens, Granularity granularity) {
    Tokenization tok;
    tok.granularity = granularity;
    for (const auto& t : tokens) {
        if (!t.word_index) {
            continue;
        }
        std::size_t w = *t.word_index;
        if (w > tok.words.size()) {
            throw DomainError("token table skips word index " + std::to_string(tok.words.size()));
        }
        if (w < tok.words.size() - (tok.words.empty() ? 0 : 1)) {
            throw DomainError("token table word indices decrease at word " + std::to_string(w));
        }
        if (w == tok.words.size()) {
            tok.words.emplace_back();
        }
        tok.words[w] += t.text;
    }
    for (auto& w : tok.words) {
        auto first = w.find_first_not_of(' ');
        auto last = w.find_last_not_of(' ');
        w = first == std::string::npos ? std::string() : w.substr(first, last - first + 1);
    }
    tok.tokens = std::move(tokens);
    return tok;
}

std::vector<WordSegment> group_tokens_to_words(const Tokenization& tok,
                                               std::span<const FrameSpan> token_spans,
                                               double frame_duration) {
    if (token_spans.size() != tok.tokens.size()) {
        throw DomainError("group_tokens_to_words: " + std::to_string(token_spans.size()) +
                          " spans for " + std::to_string(tok.tokens.size()) + " tokens");
    }
    const std::size_t n = tok.words.size();
    std::vector<std::optional<std::size_t>> first(n), last(n);
    for (std::size_t i = 0; i < tok.tokens.size(); ++i) {
        const auto& t = tok.tokens[i];
        if (!t.word_index || t.text.find_first_not_of(' ') == std::string::npos) {
            continue;
        }
        std::size_t w = *t.word_index;
        if (w >= n) {
            throw DomainError("group_tokens_to_words: token word index out of range");
        }
        if (!first[w]) {
            first[w] = i;
        }
        last[w] = i;
    }
    std::vector<WordSegment> out;
    out.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        if (!first[w]) {
            throw DomainError("group_tokens_to_words: word " + std::to_string(w) + " has no tokens");
        }
        WordSegment seg;
        seg.word = tok.words[w];
        seg.start = static_cast<double>(token_spans[*first[w]].start) * frame_duration;
        seg.end = static_cast<double>(token_spans[*last[w]].end + 1) * frame_duration;
        out.push_back(std::move(seg));
    }
    return out;
}

} // namespace attnalign
