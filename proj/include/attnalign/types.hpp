#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace attnalign {

// ─── Errors ──────────────────────────────────────────────────────────────────

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad magic, unsupported version, malformed header.
struct FormatError : Error {
    using Error::Error;
};

// Declared sizes exceed the bytes available.
struct LengthError : Error {
    using Error::Error;
};

// NaN, negative or otherwise invalid payload values.
struct DataError : Error {
    using Error::Error;
};

// Text input (TSV) that does not parse; message carries the line number.
struct ParseError : Error {
    using Error::Error;
};

// Precondition violated by the caller.
struct DomainError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// ─── Tokens and words ────────────────────────────────────────────────────────

// word_index of special tokens (task tags, BOS/EOS, punctuation-only).
inline constexpr std::optional<std::size_t> kNoWord = std::nullopt;

struct TokenRecord {
    std::string text;
    std::optional<std::size_t> word_index;

    bool is_special() const { return !word_index.has_value(); }
    bool is_space() const { return text == " "; }

    friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

struct WordSegment {
    std::string word;
    double start = 0.0; // seconds
    double end = 0.0;   // seconds

    friend bool operator==(const WordSegment&, const WordSegment&) = default;
};

// ─── Dense row-major matrix ──────────────────────────────────────────────────

// K×T attention map or cost matrix. Internal math is done in double.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& values() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ─── Heads ───────────────────────────────────────────────────────────────────

struct HeadId {
    std::size_t layer = 0;
    std::size_t head = 0;

    friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

std::string to_string(const HeadId& id); // "layer:head"

// ─── Attention dump ──────────────────────────────────────────────────────────

// All per-head cross-attention maps of one utterance. Weights are kept as
// 32-bit floats, exactly as stored on disk, in (layer, head, token, frame)
// row-major order.
struct AttentionDump {
    std::string utterance_id;
    std::size_t num_layers = 0;
    std::size_t heads_per_layer = 0;
    std::size_t num_tokens = 0;
    std::size_t num_frames = 0;
    float frame_duration_ms = 20.0f;
    std::vector<TokenRecord> tokens;
    std::vector<float> weights;

    // Rows renormalized by read_dump because their sum was off by > 1e-3.
    std::size_t renormalized_rows = 0;

    double frame_duration() const { return static_cast<double>(frame_duration_ms) / 1000.0; }
    std::size_t num_heads() const { return num_layers * heads_per_layer; }

    std::size_t offset(std::size_t layer, std::size_t head) const {
        return ((layer * heads_per_layer) + head) * num_tokens * num_frames;
    }
    std::span<const float> head_weights(const HeadId& id) const {
        return {weights.data() + offset(id.layer, id.head), num_tokens * num_frames};
    }
    std::span<float> head_weights(const HeadId& id) {
        return {weights.data() + offset(id.layer, id.head), num_tokens * num_frames};
    }

    // One head as a K×T double matrix.
    Matrix head_map(const HeadId& id) const;

    bool contains(const HeadId& id) const {
        return id.layer < num_layers && id.head < heads_per_layer;
    }

    std::vector<HeadId> all_heads() const;

    friend bool operator==(const AttentionDump&, const AttentionDump&) = default;
};

// Throws DomainError if shape, token table or weights break the dump
// invariants (row sums within `row_tolerance` of 1, weights in [0, 1]).
void validate(const AttentionDump& dump, double row_tolerance = 1e-4);

} // namespace attnalign
