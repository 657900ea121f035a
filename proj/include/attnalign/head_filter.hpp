#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "attnalign/types.hpp"

namespace attnalign {

// How alignment-like a head looks. Every criterion is oriented so that a
// higher score means a more alignment-like map.
enum class Criterion {
    NormSum,    // sum of row and column l2 norms
    ColNorm,    // sum of column l2 norms
    RowNorm,    // sum of row l2 norms
    RowEntropy, // negated mean Shannon entropy of the rows (nats)
    Coverage,   // sum over frames of log(min(column mass, 1))
};

// CLI names: norm, col-norm, row-norm, entropy, coverage.
std::string_view criterion_name(Criterion c);
std::optional<Criterion> parse_criterion(std::string_view name);
inline constexpr Criterion kAllCriteria[] = {Criterion::NormSum, Criterion::ColNorm,
                                             Criterion::RowNorm, Criterion::RowEntropy,
                                             Criterion::Coverage};

// Column mass floor for Coverage so that fully unattended frames stay finite.
inline constexpr double kCoverageFloor = 1e-10;

struct HeadScore {
    HeadId head;
    double score = 0.0;
};

struct HeadScoreTable {
    Criterion criterion = Criterion::NormSum;
    std::vector<HeadScore> scores; // ordered by (layer, head)

    std::optional<double> find(const HeadId& id) const;
};

struct TopK {
    std::size_t k = 10;
};
struct UpperHalfAll {};
struct FixedSet {
    std::vector<HeadId> heads;
};
struct OracleSelection {
    std::vector<WordSegment> reference;
    double tolerance = 0.05; // seconds
};

using SelectionStrategy = std::variant<TopK, UpperHalfAll, FixedSet, OracleSelection>;

struct HeadSelection {
    std::vector<HeadId> heads;
    std::vector<std::string> warnings;
};

double shannon_entropy(std::span<const double> p); // nats, 0·log 0 = 0
double renyi2_entropy(std::span<const double> p);  // -2·ln ||p||_2

// The sums are evaluated over sorted terms, so the result is bit-for-bit
// invariant under row and column permutations of the map.
double score_head(const Matrix& map, Criterion criterion);

// Rows of special tokens (no word index) are dropped before scoring.
HeadScoreTable score_all(const AttentionDump& dump, Criterion criterion);

HeadSelection select_heads(const HeadScoreTable& table, const SelectionStrategy& strategy,
                           const AttentionDump& dump);

// Mean of the selected heads over all K rows.
Matrix average_heads(const AttentionDump& dump, std::span<const HeadId> heads);

// Rows of `dump` that belong to words, in order.
std::vector<std::size_t> word_rows(const AttentionDump& dump);

} // namespace attnalign
