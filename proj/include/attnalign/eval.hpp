#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attnalign/attn_io.hpp"
#include "attnalign/head_filter.hpp"
#include "attnalign/types.hpp"

namespace attnalign {

// Added to the tolerance when comparing word ends, so that values such as
// 0.36 - 0.34 are not lost to rounding of seconds stored in binary.
inline constexpr double kToleranceSlack = 1e-9;

struct EvalReport {
    double tolerance = 0.0; // seconds
    std::size_t true_positives = 0;
    std::size_t num_hyp_words = 0;
    std::size_t num_ref_words = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    static EvalReport from_counts(double tolerance, std::size_t tp, std::size_t hyp, std::size_t ref);
};

using WordPair = std::pair<std::size_t, std::size_t>; // (hyp index, ref index)

// Edit-distance alignment of the normalized word sequences; only pairs whose
// normalized words are equal are returned, in increasing order.
std::vector<WordPair> match_words(std::span<const WordSegment> hyp, std::span<const WordSegment> ref);

// A matched word is a hit when its end time is within `tolerance` seconds.
EvalReport boundary_f1(std::span<const WordSegment> hyp, std::span<const WordSegment> ref,
                       double tolerance);

std::vector<EvalReport> tolerance_sweep(std::span<const WordSegment> hyp,
                                        std::span<const WordSegment> ref,
                                        std::span<const double> tolerances);

// Micro average: pools counts over utterances.
EvalReport pool_reports(std::span<const EvalReport> reports);
// Macro average: mean of per-utterance precision, recall and F1.
EvalReport macro_average(std::span<const EvalReport> reports);

// Corpus evaluation of predictions against a reference, keyed by utterance.
// Only utterances present in both maps are scored.
std::vector<EvalReport> evaluate_corpus(const SegmentsByUtterance& hyp, const SegmentsByUtterance& ref,
                                        std::span<const double> tolerances, bool macro = false);

struct HeadEval {
    HeadId head;
    EvalReport report;
};

// Aligns with every head on its own and scores the result against `ref`.
std::vector<HeadEval> per_head_eval(const AttentionDump& dump, std::span<const WordSegment> ref,
                                    double tolerance);

struct UtteranceOracle {
    HeadId head;
    EvalReport report;
};

// Best single head for one utterance; ties go to the lowest (layer, head).
UtteranceOracle oracle_head(const AttentionDump& dump, std::span<const WordSegment> ref, double tolerance);

struct OracleResult {
    HeadId head;       // most frequent per-utterance oracle head
    double f1 = 0.0;   // corpus F1 with each utterance using its own oracle head
    EvalReport report; // pooled counts behind f1
    std::map<std::string, HeadId> per_utterance;
};

OracleResult summarize_oracles(const std::map<std::string, UtteranceOracle>& per_utterance);

OracleResult oracle_search(std::span<const AttentionDump> dumps, const SegmentsByUtterance& ref,
                           double tolerance);

// Histogram of oracle heads, most frequent first (ties by head id).
std::vector<std::pair<HeadId, std::size_t>> oracle_histogram(const std::map<std::string, HeadId>& oracle);

// Fraction of utterances whose oracle head is in the selected set.
double hit_rate(const std::map<std::string, std::vector<HeadId>>& selected,
                const std::map<std::string, HeadId>& oracle);

struct ScatterPoint {
    HeadId head;
    double score = 0.0;
    double f1 = 0.0;
};

std::vector<ScatterPoint> head_score_scatter(const AttentionDump& dump, std::span<const WordSegment> ref,
                                             Criterion criterion, double tolerance);

} // namespace attnalign
