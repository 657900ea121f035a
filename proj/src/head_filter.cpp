#include "attnalign/head_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attnalign/eval.hpp"

namespace attnalign {

namespace {

// Sum of a multiset, independent of the order the terms arrive in.
double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    return std::accumulate(terms.begin(), terms.end(), 0.0);
}

double row_norm_sum(const Matrix& a) {
    std::vector<double> norms, squares(a.cols());
    norms.reserve(a.rows());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t t = 0; t < a.cols(); ++t) {
            squares[t] = a(k, t) * a(k, t);
        }
        norms.push_back(std::sqrt(sorted_sum(squares)));
    }
    return sorted_sum(norms);
}

double col_norm_sum(const Matrix& a) {
    std::vector<double> norms, squares(a.rows());
    norms.reserve(a.cols());
    for (std::size_t t = 0; t < a.cols(); ++t) {
        for (std::size_t k = 0; k < a.rows(); ++k) {
            squares[k] = a(k, t) * a(k, t);
        }
        norms.push_back(std::sqrt(sorted_sum(squares)));
    }
    return sorted_sum(norms);
}

double neg_mean_row_entropy(const Matrix& a) {
    std::vector<double> entropies;
    entropies.reserve(a.rows());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        entropies.push_back(shannon_entropy(a.row(k)));
    }
    return -sorted_sum(entropies) / static_cast<double>(a.rows());
}

double coverage(const Matrix& a) {
    std::vector<double> logs, mass(a.rows());
    logs.reserve(a.cols());
    for (std::size_t t = 0; t < a.cols(); ++t) {
        for (std::size_t k = 0; k < a.rows(); ++k) {
            mass[k] = a(k, t);
        }
        double m = std::clamp(sorted_sum(mass), kCoverageFloor, 1.0);
        logs.push_back(std::log(m));
    }
    return sorted_sum(logs);
}

Matrix select_rows(const Matrix& full, std::span<const std::size_t> rows) {
    Matrix m(rows.size(), full.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(full.row(rows[i]).begin(), full.row(rows[i]).end(), m.row(i).begin());
    }
    return m;
}

} // namespace

std::string_view criterion_name(Criterion c) {
    switch (c) {
    case Criterion::NormSum: return "norm";
    case Criterion::ColNorm: return "col-norm";
    case Criterion::RowNorm: return "row-norm";
    case Criterion::RowEntropy: return "entropy";
    case Criterion::Coverage: return "coverage";
    }
    return "?";
}

std::optional<Criterion> parse_criterion(std::string_view name) {
    for (auto c : kAllCriteria) {
        if (criterion_name(c) == name) {
            return c;
        }
    }
    return std::nullopt;
}

std::optional<double> HeadScoreTable::find(const HeadId& id) const {
    for (const auto& s : scores) {
        if (s.head == id) {
            return s.score;
        }
    }
    return std::nullopt;
}

double shannon_entropy(std::span<const double> p) {
    std::vector<double> terms;
    terms.reserve(p.size());
    for (double v : p) {
        if (v > 0.0) {
            terms.push_back(-v * std::log(v));
        }
    }
    return sorted_sum(terms);
}

double renyi2_entropy(std::span<const double> p) {
    std::vector<double> squares;
    squares.reserve(p.size());
    for (double v : p) {
        squares.push_back(v * v);
    }
    return -std::log(sorted_sum(squares)); // -2·ln sqrt(x) = -ln x
}

double score_head(const Matrix& map, Criterion criterion) {
    if (map.empty()) {
        throw DomainError("score_head: empty map");
    }
    for (double v : map.values()) {
        if (std::isnan(v)) {
            throw DomainError("score_head: NaN in attention map");
        }
    }
    switch (criterion) {
    case Criterion::NormSum: return row_norm_sum(map) + col_norm_sum(map);
    case Criterion::ColNorm: return col_norm_sum(map);
    case Criterion::RowNorm: return row_norm_sum(map);
    case Criterion::RowEntropy: return neg_mean_row_entropy(map);
    case Criterion::Coverage: return coverage(map);
    }
    throw DomainError("score_head: unknown criterion");
}

std::vector<std::size_t> word_rows(const AttentionDump& dump) {
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < dump.tokens.size(); ++k) {
        if (!dump.tokens[k].is_special()) {
            rows.push_back(k);
        }
    }
    return rows;
}

HeadScoreTable score_all(const AttentionDump& dump, Criterion criterion) {
    const auto rows = word_rows(dump);
    if (rows.empty()) {
        throw DomainError("score_all: dump '" + dump.utterance_id + "' has no word tokens");
    }
    HeadScoreTable table;
    table.criterion = criterion;
    table.scores.reserve(dump.num_heads());
    for (const auto& id : dump.all_heads()) {
        try {
            table.scores.push_back({id, score_head(select_rows(dump.head_map(id), rows), criterion)});
        } catch (const DomainError& e) {
            throw DomainError("head " + to_string(id) + ": " + e.what());
        }
    }
    return table;
}

HeadSelection select_heads(const HeadScoreTable& table, const SelectionStrategy& strategy,
                           const AttentionDump& dump) {
    HeadSelection sel;
    if (const auto* top = std::get_if<TopK>(&strategy)) {
        if (top->k == 0) {
            throw DomainError("select_heads: k must be >= 1");
        }
        std::vector<HeadScore> ranked = table.scores;
        std::stable_sort(ranked.begin(), ranked.end(), [](const HeadScore& a, const HeadScore& b) {
            if (a.score != b.score) {
                return a.score > b.score;
            }
            return a.head < b.head;
        });
        if (top->k > ranked.size()) {
            sel.warnings.push_back("top-k " + std::to_string(top->k) + " exceeds the " +
                                   std::to_string(ranked.size()) + " available heads; using all");
        }
        const std::size_t n = std::min(top->k, ranked.size());
        for (std::size_t i = 0; i < n; ++i) {
            sel.heads.push_back(ranked[i].head);
        }
    } else if (std::holds_alternative<UpperHalfAll>(strategy)) {
        for (const auto& id : dump.all_heads()) {
            if (id.layer >= dump.num_layers / 2) {
                sel.heads.push_back(id);
            }
        }
    } else if (const auto* fixed = std::get_if<FixedSet>(&strategy)) {
        if (fixed->heads.empty()) {
            throw DomainError("select_heads: fixed head set is empty");
        }
        for (const auto& id : fixed->heads) {
            if (!dump.contains(id)) {
                throw DomainError("select_heads: fixed head " + to_string(id) +
                                  " is out of bounds for dump '" + dump.utterance_id + "'");
            }
        }
        sel.heads = fixed->heads;
    } else if (const auto* oracle = std::get_if<OracleSelection>(&strategy)) {
        sel.heads.push_back(oracle_head(dump, oracle->reference, oracle->tolerance).head);
    }
    return sel;
}

Matrix average_heads(const AttentionDump& dump, std::span<const HeadId> heads) {
    if (heads.empty()) {
        throw DomainError("average_heads: empty head list");
    }
    Matrix avg(dump.num_tokens, dump.num_frames);
    for (const auto& id : heads) {
        if (!dump.contains(id)) {
            throw DomainError("average_heads: head " + to_string(id) + " out of bounds");
        }
        auto w = dump.head_weights(id);
        for (std::size_t k = 0; k < dump.num_tokens; ++k) {
            for (std::size_t t = 0; t < dump.num_frames; ++t) {
                avg(k, t) += static_cast<double>(w[k * dump.num_frames + t]);
            }
        }
    }
    if (heads.size() > 1) {
        const double scale = 1.0 / static_cast<double>(heads.size());
        for (std::size_t k = 0; k < avg.rows(); ++k) {
            for (double& v : avg.row(k)) {
                v *= scale;
            }
        }
    }
    return avg;
}

} // namespace attnalign
