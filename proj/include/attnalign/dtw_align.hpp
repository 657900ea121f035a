#pragma once

#include <span>
#include <utility>
#include <vector>

#include "attnalign/head_filter.hpp"
#include "attnalign/tokenization.hpp"
#include "attnalign/types.hpp"

namespace attnalign {

// Floor on the column norm used to sharpen the averaged map.
inline constexpr double kColumnNormFloor = 1e-8;

struct PathStep {
    std::size_t row = 0; // token
    std::size_t col = 0; // frame

    friend bool operator==(const PathStep&, const PathStep&) = default;
};

using AlignmentPath = std::vector<PathStep>;

struct DtwResult {
    AlignmentPath path;
    double total_cost = 0.0;
};

// Step preference when several predecessors reach the same accumulated cost.
enum class StepKind { Diagonal = 0, Horizontal = 1, Vertical = 2 };

// Cost of aligning word token i with frame j: -A[i][j] / max(||A[:, j]||, eps),
// with special-token rows removed and norms taken over the retained rows.
Matrix build_cost(const Matrix& averaged, std::span<const TokenRecord> tokens);

// Full-path DTW from (0, 0) to (K-1, T-1) with steps (1,0), (0,1), (1,1).
// Backtrace prefers diagonal, then horizontal, then vertical on exact ties.
DtwResult dtw(const Matrix& cost);

// Checks start, end, step set and full row/column coverage.
bool is_valid_path(const AlignmentPath& path, std::size_t rows, std::size_t cols);

// (min frame, max frame) per token row.
std::vector<FrameSpan> path_to_spans(const AlignmentPath& path);

// Cost -> DTW -> spans -> word segments for an already averaged map.
std::vector<WordSegment> align_averaged(const AttentionDump& dump, const Matrix& averaged);

std::vector<WordSegment> align_with_heads(const AttentionDump& dump, std::span<const HeadId> heads);

// score_all -> select_heads -> average_heads -> build_cost -> dtw ->
// path_to_spans -> group_tokens_to_words.
std::vector<WordSegment> align_utterance(const AttentionDump& dump,
                                         const SelectionStrategy& strategy,
                                         Criterion criterion);

} // namespace attnalign
