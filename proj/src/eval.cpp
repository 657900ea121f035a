#include "attnalign/eval.hpp"

#include <algorithm>
#include <cmath>

#include "attnalign/dtw_align.hpp"
#include "attnalign/tokenization.hpp"

namespace attnalign {

EvalReport EvalReport::from_counts(double tolerance, std::size_t tp, std::size_t hyp, std::size_t ref) {
    EvalReport r;
    r.tolerance = tolerance;
    r.true_positives = tp;
    r.num_hyp_words = hyp;
    r.num_ref_words = ref;
    r.precision = hyp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(hyp);
    r.recall = ref == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(ref);
    r.f1 = (r.precision + r.recall) == 0.0 ? 0.0
                                            : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

std::vector<WordPair> match_words(std::span<const WordSegment> hyp, std::span<const WordSegment> ref) {
    std::vector<std::string> h, r;
    h.reserve(hyp.size());
    r.reserve(ref.size());
    for (const auto& s : hyp) {
        h.push_back(normalize_for_matching(s.word));
    }
    for (const auto& s : ref) {
        r.push_back(normalize_for_matching(s.word));
    }

    const std::size_t n = h.size();
    const std::size_t m = r.size();
    // d[i][j] ranks alignments of h[0..i) and r[0..j): edit distance first,
    // then more matched words. Each edit costs w; each match subtracts 1.
    const long w = static_cast<long>(n + m + 1);
    std::vector<long> d((n + 1) * (m + 1));
    auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
    for (std::size_t i = 0; i <= n; ++i) {
        d[at(i, 0)] = static_cast<long>(i) * w;
    }
    for (std::size_t j = 0; j <= m; ++j) {
        d[at(0, j)] = static_cast<long>(j) * w;
    }
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            long diag = d[at(i - 1, j - 1)] + (h[i - 1] == r[j - 1] ? -1 : w);
            d[at(i, j)] = std::min({diag, d[at(i - 1, j)] + w, d[at(i, j - 1)] + w});
        }
    }

    // Every preference below is symmetric in (hyp, ref), so swapping the two
    // sequences yields the transposed pairs.
    std::vector<WordPair> pairs;
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 && j > 0) {
        const long here = d[at(i, j)];
        if (h[i - 1] == r[j - 1] && here == d[at(i - 1, j - 1)] - 1) {
            pairs.emplace_back(i - 1, j - 1);
            --i;
            --j;
            continue;
        }
        if (h[i - 1] != r[j - 1] && here == d[at(i - 1, j - 1)] + w) {
            --i;
            --j;
            continue;
        }
        const bool drop_hyp = here == d[at(i - 1, j)] + w;
        const bool drop_ref = here == d[at(i, j - 1)] + w;
        if (drop_hyp && (!drop_ref || h[i - 1] > r[j - 1])) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(pairs.begin(), pairs.end());
    return pairs;
}

EvalReport boundary_f1(std::span<const WordSegment> hyp, std::span<const WordSegment> ref,
                       double tolerance) {
    if (tolerance < 0.0) {
        throw DomainError("boundary_f1: negative tolerance");
    }
    std::size_t tp = 0;
    for (const auto& [hi, ri] : match_words(hyp, ref)) {
        if (std::abs(hyp[hi].end - ref[ri].end) <= tolerance + kToleranceSlack) {
            ++tp;
        }
    }
    return EvalReport::from_counts(tolerance, tp, hyp.size(), ref.size());
}

std::vector<EvalReport> tolerance_sweep(std::span<const WordSegment> hyp,
                                        std::span<const WordSegment> ref,
                                        std::span<const double> tolerances) {
    if (tolerances.empty()) {
        throw DomainError("tolerance_sweep: empty tolerance list");
    }
    const auto pairs = match_words(hyp, ref);
    std::vector<EvalReport> out;
    out.reserve(tolerances.size());
    for (double tol : tolerances) {
        if (tol < 0.0) {
            throw DomainError("tolerance_sweep: negative tolerance");
        }
        std::size_t tp = 0;
        for (const auto& [hi, ri] : pairs) {
            if (std::abs(hyp[hi].end - ref[ri].end) <= tol + kToleranceSlack) {
                ++tp;
            }
        }
        out.push_back(EvalReport::from_counts(tol, tp, hyp.size(), ref.size()));
    }
    return out;
}

EvalReport pool_reports(std::span<const EvalReport> reports) {
    std::size_t tp = 0, hyp = 0, ref = 0;
    double tol = reports.empty() ? 0.0 : reports.front().tolerance;
    for (const auto& r : reports) {
        tp += r.true_positives;
        hyp += r.num_hyp_words;
        ref += r.num_ref_words;
    }
    return EvalReport::from_counts(tol, tp, hyp, ref);
}

EvalReport macro_average(std::span<const EvalReport> reports) {
    EvalReport out = pool_reports(reports);
    if (reports.empty()) {
        return out;
    }
    double p = 0.0, r = 0.0, f = 0.0;
    for (const auto& rep : reports) {
        p += rep.precision;
        r += rep.recall;
        f += rep.f1;
    }
    const auto n = static_cast<double>(reports.size());
    out.precision = p / n;
    out.recall = r / n;
    out.f1 = f / n;
    return out;
}

std::vector<EvalReport> evaluate_corpus(const SegmentsByUtterance& hyp, const SegmentsByUtterance& ref,
                                        std::span<const double> tolerances, bool macro) {
    std::vector<std::vector<EvalReport>> per_tol(tolerances.size());
    for (const auto& [utt, h] : hyp) {
        auto it = ref.find(utt);
        if (it == ref.end()) {
            continue;
        }
        auto reports = tolerance_sweep(h, it->second, tolerances);
        for (std::size_t i = 0; i < reports.size(); ++i) {
            per_tol[i].push_back(reports[i]);
        }
    }
    std::vector<EvalReport> out;
    out.reserve(tolerances.size());
    for (std::size_t i = 0; i < tolerances.size(); ++i) {
        auto rep = macro ? macro_average(per_tol[i]) : pool_reports(per_tol[i]);
        rep.tolerance = tolerances[i];
        out.push_back(rep);
    }
    return out;
}

std::vector<HeadEval> per_head_eval(const AttentionDump& dump, std::span<const WordSegment> ref,
                                    double tolerance) {
    std::vector<HeadEval> out;
    out.reserve(dump.num_heads());
    for (const auto& id : dump.all_heads()) {
        const HeadId single[] = {id};
        const auto hyp = align_with_heads(dump, single);
        out.push_back({id, boundary_f1(hyp, ref, tolerance)});
    }
    return out;
}

UtteranceOracle oracle_head(const AttentionDump& dump, std::span<const WordSegment> ref, double tolerance) {
    const auto evals = per_head_eval(dump, ref, tolerance);
    const HeadEval* best = &evals.front();
    for (const auto& e : evals) {
        // Heads arrive in (layer, head) order, so strict improvement keeps the lowest id on ties.
        if (e.report.f1 > best->report.f1) {
            best = &e;
        }
    }
    return {best->head, best->report};
}

std::vector<std::pair<HeadId, std::size_t>> oracle_histogram(const std::map<std::string, HeadId>& oracle) {
    std::map<HeadId, std::size_t> counts;
    for (const auto& [utt, head] : oracle) {
        ++counts[head];
    }
    std::vector<std::pair<HeadId, std::size_t>> hist(counts.begin(), counts.end());
    std::stable_sort(hist.begin(), hist.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return hist;
}

OracleResult summarize_oracles(const std::map<std::string, UtteranceOracle>& per_utterance) {
    OracleResult result;
    std::vector<EvalReport> reports;
    reports.reserve(per_utterance.size());
    for (const auto& [utt, o] : per_utterance) {
        result.per_utterance[utt] = o.head;
        reports.push_back(o.report);
    }
    result.report = pool_reports(reports);
    result.f1 = result.report.f1;
    auto hist = oracle_histogram(result.per_utterance);
    if (!hist.empty()) {
        result.head = hist.front().first;
    }
    return result;
}

OracleResult oracle_search(std::span<const AttentionDump> dumps, const SegmentsByUtterance& ref,
                           double tolerance) {
    std::map<std::string, UtteranceOracle> per_utt;
    for (const auto& dump : dumps) {
        auto it = ref.find(dump.utterance_id);
        if (it == ref.end()) {
            throw DomainError("oracle_search: no reference for utterance '" + dump.utterance_id + "'");
        }
        per_utt[dump.utterance_id] = oracle_head(dump, it->second, tolerance);
    }
    return summarize_oracles(per_utt);
}

double hit_rate(const std::map<std::string, std::vector<HeadId>>& selected,
                const std::map<std::string, HeadId>& oracle) {
    if (selected.size() != oracle.size()) {
        throw DomainError("hit_rate: selected and oracle cover different utterances");
    }
    if (oracle.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (const auto& [utt, head] : oracle) {
        auto it = selected.find(utt);
        if (it == selected.end()) {
            throw DomainError("hit_rate: no selection for utterance '" + utt + "'");
        }
        if (std::find(it->second.begin(), it->second.end(), head) != it->second.end()) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(oracle.size());
}

std::vector<ScatterPoint> head_score_scatter(const AttentionDump& dump, std::span<const WordSegment> ref,
                                             Criterion criterion, double tolerance) {
    const auto table = score_all(dump, criterion);
    const auto evals = per_head_eval(dump, ref, tolerance);
    std::vector<ScatterPoint> out;
    out.reserve(evals.size());
    for (std::size_t i = 0; i < evals.size(); ++i) {
        out.push_back({evals[i].head, table.scores[i].score, evals[i].report.f1});
    }
    return out;
}

} // namespace attnalign
