#include "attnalign/dtw_align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace attnalign {

Matrix build_cost(const Matrix& averaged, std::span<const TokenRecord> tokens) {
    if (tokens.size() != averaged.rows()) {
        throw DomainError("build_cost: " + std::to_string(tokens.size()) + " tokens for " +
                          std::to_string(averaged.rows()) + " rows");
    }
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (!tokens[k].is_special()) {
            rows.push_back(k);
        }
    }
    if (rows.empty()) {
        throw DomainError("build_cost: every token row is special");
    }
    const std::size_t cols = averaged.cols();
    std::vector<double> norm(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        double sq = 0.0;
        for (std::size_t r : rows) {
            double v = averaged(r, j);
            if (!(v >= 0.0)) {
                throw DomainError("build_cost: negative or NaN attention weight");
            }
            sq += v * v;
        }
        norm[j] = std::max(std::sqrt(sq), kColumnNormFloor);
    }
    Matrix cost(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            cost(i, j) = -averaged(rows[i], j) / norm[j];
        }
    }
    return cost;
}

DtwResult dtw(const Matrix& cost) {
    if (cost.empty()) {
        throw DomainError("dtw: empty cost matrix");
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = cost.rows();
    const std::size_t m = cost.cols();

    Matrix q(n, m, inf);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == 0 && j == 0) {
                q(0, 0) = cost(0, 0);
                continue;
            }
            double best = inf;
            if (i > 0 && j > 0) {
                best = q(i - 1, j - 1);
            }
            if (j > 0) {
                best = std::min(best, q(i, j - 1));
            }
            if (i > 0) {
                best = std::min(best, q(i - 1, j));
            }
            q(i, j) = best + cost(i, j);
        }
    }

    DtwResult result;
    result.total_cost = q(n - 1, m - 1);

    std::size_t i = n - 1;
    std::size_t j = m - 1;
    result.path.push_back({i, j});
    while (i > 0 || j > 0) {
        // Candidates in preference order; only a strictly smaller value
        // displaces an earlier candidate.
        StepKind step = StepKind::Diagonal;
        double best = inf;
        if (i > 0 && j > 0) {
            best = q(i - 1, j - 1);
        }
        if (j > 0 && q(i, j - 1) < best) {
            best = q(i, j - 1);
            step = StepKind::Horizontal;
        }
        if (i > 0 && q(i - 1, j) < best) {
            best = q(i - 1, j);
            step = StepKind::Vertical;
        }
        switch (step) {
        case StepKind::Diagonal: --i; --j; break;
        case StepKind::Horizontal: --j; break;
        case StepKind::Vertical: --i; break;
        }
        result.path.push_back({i, j});
    }
    std::reverse(result.path.begin(), result.path.end());
    return result;
}

bool is_valid_path(const AlignmentPath& path, std::size_t rows, std::size_t cols) {
    if (path.empty() || rows == 0 || cols == 0) {
        return false;
    }
    if (path.front() != PathStep{0, 0} || path.back() != PathStep{rows - 1, cols - 1}) {
        return false;
    }
    for (std::size_t s = 1; s < path.size(); ++s) {
        auto di = path[s].row - path[s - 1].row;
        auto dj = path[s].col - path[s - 1].col;
        if (path[s].row < path[s - 1].row || path[s].col < path[s - 1].col || di > 1 || dj > 1 ||
            (di == 0 && dj == 0)) {
            return false;
        }
    }
    // Unit steps from (0,0) to the far corner necessarily touch every row
    // and column, so coverage follows from the checks above.
    return true;
}

std::vector<FrameSpan> path_to_spans(const AlignmentPath& path) {
    std::vector<FrameSpan> spans;
    for (const auto& s : path) {
        if (s.row == spans.size()) {
            spans.push_back({s.col, s.col});
        } else if (s.row + 1 == spans.size()) {
            spans.back().start = std::min(spans.back().start, s.col);
            spans.back().end = std::max(spans.back().end, s.col);
        } else {
            throw DomainError("path_to_spans: path skips or revisits token rows");
        }
    }
    return spans;
}

namespace {

Granularity infer_granularity(std::span<const TokenRecord> tokens) {
    for (const auto& t : tokens) {
        if (split_utf8(t.text).size() != 1) {
            return Granularity::Wordpiece;
        }
    }
    return Granularity::Character;
}

} // namespace

std::vector<WordSegment> align_averaged(const AttentionDump& dump, const Matrix& averaged) {
    const Matrix cost = build_cost(averaged, dump.tokens);
    const DtwResult result = dtw(cost);
    const auto spans = path_to_spans(result.path);

    std::vector<TokenRecord> word_tokens;
    word_tokens.reserve(cost.rows());
    for (const auto& t : dump.tokens) {
        if (!t.is_special()) {
            word_tokens.push_back(t);
        }
    }
    const auto granularity = infer_granularity(word_tokens);
    const auto tok = tokenization_from_records(std::move(word_tokens), granularity);
    return group_tokens_to_words(tok, spans, dump.frame_duration());
}

std::vector<WordSegment> align_with_heads(const AttentionDump& dump, std::span<const HeadId> heads) {
    return align_averaged(dump, average_heads(dump, heads));
}

std::vector<WordSegment> align_utterance(const AttentionDump& dump,
                                         const SelectionStrategy& strategy,
                                         Criterion criterion) {
    HeadSelection sel;
    if (std::holds_alternative<OracleSelection>(strategy)) {
        sel = select_heads(HeadScoreTable{criterion, {}}, strategy, dump);
    } else {
        sel = select_heads(score_all(dump, criterion), strategy, dump);
    }
    return align_with_heads(dump, sel.heads);
}

} // namespace attnalign
