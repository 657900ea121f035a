#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnalign/attn_io.hpp"
#include "attnalign/dtw_align.hpp"
#include "attnalign/eval.hpp"
#include "attnalign/head_filter.hpp"
#include "attnalign/synth.hpp"

namespace fs = std::filesystem;

namespace attnalign::cli {

namespace {

const std::vector<double> kDefaultTolerancesMs = {20, 40, 50, 60, 80, 100};

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string shortest(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string percent(double fraction) { return fixed(100.0 * fraction, 1) + "%"; }

// ─── Output sinks ────────────────────────────────────────────────────────────

// A file when a path is given, otherwise the command's stdout. Console
// summaries go to stdout only when the data itself went to a file.
class Sink {
public:
    Sink(const std::string& path, std::ostream& stdout_stream) {
        if (path.empty() || path == "-") {
            stream_ = &stdout_stream;
        } else {
            file_.open(path, std::ios::trunc);
            if (!file_) {
                throw IoError("cannot open " + path + " for writing");
            }
            stream_ = &file_;
            to_file_ = true;
        }
    }

    std::ostream& stream() { return *stream_; }
    bool to_file() const { return to_file_; }

    void close() {
        if (to_file_) {
            file_.close();
            if (!file_) {
                throw IoError("failed writing output file");
            }
        } else {
            stream_->flush();
        }
    }

private:
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
    bool to_file_ = false;
};

// ─── Inputs and the worker pool ──────────────────────────────────────────────

std::vector<fs::path> resolve_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        fs::path p(in);
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file() && entry.path().extension() == ".atnm") {
                    found.push_back(entry.path());
                }
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

template <typename R>
struct Item {
    std::optional<R> value;
    std::string error;
};

// Runs fn(i) for i in [0, n) on `jobs` threads. Results keep input order, so
// output does not depend on the degree of parallelism.
template <typename R, typename F>
std::vector<Item<R>> parallel_map(std::size_t n, std::size_t jobs, F fn) {
    std::vector<Item<R>> results(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i].value = fn(i);
            } catch (const std::exception& e) {
                results[i].error = e.what();
            }
        }
    };
    if (jobs == 0) {
        jobs = std::max(1u, std::thread::hardware_concurrency());
    }
    jobs = std::min(jobs, std::max<std::size_t>(n, 1));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    return results;
}

// Prints per-file errors. Returns the exit code to use if the command should
// stop now, or nullopt to continue with the successful items.
template <typename R>
std::optional<int> report_failures(const std::vector<Item<R>>& items, const std::vector<fs::path>& files,
                                   bool keep_going, std::ostream& err, bool& partial) {
    std::size_t failed = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].value) {
            err << "error: " << files[i].string() << ": " << items[i].error << '\n';
            ++failed;
        }
    }
    if (failed == 0) {
        return std::nullopt;
    }
    if (!keep_going) {
        err << failed << " of " << items.size() << " inputs failed (use --keep-going to continue)\n";
        return kDataError;
    }
    partial = true;
    return std::nullopt;
}

template <typename R>
std::optional<int> check_unique_ids(const std::vector<Item<R>>& items, std::ostream& err) {
    std::set<std::string> seen;
    for (const auto& item : items) {
        if (item.value && !seen.insert(item.value->utterance_id).second) {
            err << "error: utterance '" << item.value->utterance_id << "' appears in more than one dump\n";
            return kDataError;
        }
    }
    return std::nullopt;
}

const std::vector<WordSegment>& reference_for(const SegmentsByUtterance& ref, const std::string& utt) {
    auto it = ref.find(utt);
    if (it == ref.end()) {
        throw DataError("no reference alignment for utterance '" + utt + "'");
    }
    return it->second;
}

std::vector<HeadId> parse_fixed_heads(const std::string& spec) {
    std::vector<HeadId> heads;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw CLI::ValidationError("--fixed-heads", "expected LAYER:HEAD, got '" + item + "'");
        }
        try {
            std::size_t used = 0;
            const std::string layer = item.substr(0, colon);
            const std::string head = item.substr(colon + 1);
            HeadId id{std::stoul(layer, &used), 0};
            if (used != layer.size()) {
                throw std::invalid_argument(layer);
            }
            id.head = std::stoul(head, &used);
            if (used != head.size()) {
                throw std::invalid_argument(head);
            }
            heads.push_back(id);
        } catch (const std::logic_error&) {
            throw CLI::ValidationError("--fixed-heads", "expected LAYER:HEAD, got '" + item + "'");
        }
    }
    if (heads.empty()) {
        throw CLI::ValidationError("--fixed-heads", "no heads given");
    }
    return heads;
}

Criterion criterion_from(const std::string& name) {
    auto c = parse_criterion(name);
    if (!c) {
        throw CLI::ValidationError("--criterion", "unknown criterion '" + name + "'");
    }
    return *c;
}

std::vector<double> seconds(const std::vector<double>& ms) {
    std::vector<double> s;
    s.reserve(ms.size());
    for (double v : ms) {
        s.push_back(v / 1000.0);
    }
    return s;
}

void add_criterion_option(CLI::App* cmd, std::string& criterion) {
    cmd->add_option("--criterion", criterion, "Head score: norm, col-norm, row-norm, entropy, coverage")
        ->check(CLI::IsMember({"norm", "col-norm", "row-norm", "entropy", "coverage"}))
        ->capture_default_str();
}

// ─── align ───────────────────────────────────────────────────────────────────

struct AlignOptions {
    std::vector<std::string> inputs;
    std::string reference;
    std::string criterion = "norm";
    std::size_t top_k = 10;
    bool upper_half = false;
    std::string fixed_heads;
    bool oracle = false;
    double tolerance_ms = 50.0;
    std::string out;
    std::size_t jobs = 1;
    bool keep_going = false;
};

struct AlignedUtterance {
    std::string utterance_id;
    std::vector<WordSegment> segments;
    std::vector<std::string> warnings;
};

int cmd_align(const AlignOptions& opt, std::ostream& out, std::ostream& err) {
    const Criterion criterion = criterion_from(opt.criterion);
    SegmentsByUtterance reference;
    if (!opt.reference.empty()) {
        reference = read_reference_alignments_file(opt.reference);
    }
    std::optional<std::vector<HeadId>> fixed;
    if (!opt.fixed_heads.empty()) {
        fixed = parse_fixed_heads(opt.fixed_heads);
    }

    const auto files = resolve_inputs(opt.inputs);
    auto items = parallel_map<AlignedUtterance>(files.size(), opt.jobs, [&](std::size_t i) {
        const AttentionDump dump = read_dump_file(files[i]);
        SelectionStrategy strategy = TopK{opt.top_k};
        if (opt.upper_half) {
            strategy = UpperHalfAll{};
        } else if (fixed) {
            strategy = FixedSet{*fixed};
        } else if (opt.oracle) {
            strategy = OracleSelection{reference_for(reference, dump.utterance_id), opt.tolerance_ms / 1000.0};
        }
        AlignedUtterance result{dump.utterance_id, {}, {}};
        if (const auto* top = std::get_if<TopK>(&strategy); top && top->k > dump.num_heads()) {
            result.warnings.push_back("top-k " + std::to_string(top->k) + " exceeds the " +
                                      std::to_string(dump.num_heads()) + " heads; using all");
        }
        if (dump.renormalized_rows > 0) {
            result.warnings.push_back(std::to_string(dump.renormalized_rows) + " attention rows renormalized");
        }
        result.segments = align_utterance(dump, strategy, criterion);
        return result;
    });

    bool partial = false;
    if (auto code = report_failures(items, files, opt.keep_going, err, partial)) {
        return *code;
    }
    if (auto code = check_unique_ids(items, err)) {
        return *code;
    }

    SegmentsByUtterance predictions;
    std::size_t words = 0;
    for (const auto& item : items) {
        if (!item.value) {
            continue;
        }
        for (const auto& w : item.value->warnings) {
            err << "warning: " << item.value->utterance_id << ": " << w << '\n';
        }
        words += item.value->segments.size();
        predictions[item.value->utterance_id] = item.value->segments;
    }
    Sink sink(opt.out, out);
    write_segments(predictions, sink.stream());
    sink.close();
    (sink.to_file() ? out : err) << "aligned " << predictions.size() << " utterances, " << words
                                 << " words\n";
    return partial ? kPartialFailure : kSuccess;
}

// ─── eval ────────────────────────────────────────────────────────────────────

struct EvalOptions {
    std::string predictions;
    std::string reference;
    std::vector<double> tolerances_ms = kDefaultTolerancesMs;
    std::string out;
    bool macro = false;
    bool strict = false;
};

void write_report_csv(std::ostream& os, const std::vector<EvalReport>& reports) {
    os << "tolerance_ms,precision,recall,f1,tp,hyp_words,ref_words\n";
    for (const auto& r : reports) {
        os << shortest(r.tolerance * 1000.0) << ',' << fixed(r.precision) << ',' << fixed(r.recall) << ','
           << fixed(r.f1) << ',' << r.true_positives << ',' << r.num_hyp_words << ',' << r.num_ref_words
           << '\n';
    }
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
    SegmentsByUtterance hyp = read_reference_alignments_file(opt.predictions);
    const SegmentsByUtterance ref = read_reference_alignments_file(opt.reference);

    std::vector<std::string> missing;
    for (const auto& [utt, segs] : hyp) {
        if (!ref.contains(utt)) {
            missing.push_back(utt);
        }
    }
    for (const auto& utt : missing) {
        err << (opt.strict ? "error" : "warning") << ": utterance '" << utt
            << "' is missing from the reference" << (opt.strict ? "" : "; excluded") << '\n';
        hyp.erase(utt);
    }
    if (opt.strict && !missing.empty()) {
        return kDataError;
    }
    std::size_t unpredicted = 0;
    for (const auto& [utt, segs] : ref) {
        unpredicted += hyp.contains(utt) ? 0 : 1;
    }
    if (unpredicted > 0) {
        err << "warning: " << unpredicted << " reference utterances have no predictions and are not scored\n";
    }

    const auto tolerances = seconds(opt.tolerances_ms);
    const auto reports = evaluate_corpus(hyp, ref, tolerances, opt.macro);
    Sink sink(opt.out, out);
    write_report_csv(sink.stream(), reports);
    sink.close();

    const double headline[] = {0.050, 0.100};
    const auto heads = evaluate_corpus(hyp, ref, headline, opt.macro);
    std::ostream& console = sink.to_file() ? out : err;
    console << "utterances " << hyp.size() << "  F1@50ms " << fixed(100.0 * heads[0].f1, 1) << "  F1@100ms "
            << fixed(100.0 * heads[1].f1, 1) << (opt.macro ? "  (macro)" : "") << '\n';
    return kSuccess;
}

// ─── oracle ──────────────────────────────────────────────────────────────────

struct OracleOptions {
    std::vector<std::string> inputs;
    std::string reference;
    double tolerance_ms = 50.0;
    std::string criterion = "norm";
    std::string out;
    std::string histogram;
    std::string scatter;
    std::size_t jobs = 1;
    bool keep_going = false;
};

struct OracleItem {
    std::string utterance_id;
    std::size_t num_layers = 0;
    UtteranceOracle oracle;
    std::vector<ScatterPoint> scatter;
};

int cmd_oracle(const OracleOptions& opt, std::ostream& out, std::ostream& err) {
    const Criterion criterion = criterion_from(opt.criterion);
    const SegmentsByUtterance reference = read_reference_alignments_file(opt.reference);
    const double tolerance = opt.tolerance_ms / 1000.0;
    const auto files = resolve_inputs(opt.inputs);

    auto items = parallel_map<OracleItem>(files.size(), opt.jobs, [&](std::size_t i) {
        const AttentionDump dump = read_dump_file(files[i]);
        const auto& ref = reference_for(reference, dump.utterance_id);
        OracleItem item{dump.utterance_id, dump.num_layers, oracle_head(dump, ref, tolerance), {}};
        if (!opt.scatter.empty()) {
            item.scatter = head_score_scatter(dump, ref, criterion, tolerance);
        }
        return item;
    });

    bool partial = false;
    if (auto code = report_failures(items, files, opt.keep_going, err, partial)) {
        return *code;
    }
    if (auto code = check_unique_ids(items, err)) {
        return *code;
    }

    std::map<std::string, UtteranceOracle> per_utt;
    std::map<std::string, std::size_t> layers;
    for (const auto& item : items) {
        if (item.value) {
            per_utt[item.value->utterance_id] = item.value->oracle;
            layers[item.value->utterance_id] = item.value->num_layers;
        }
    }
    const OracleResult result = summarize_oracles(per_utt);
    const auto hist = oracle_histogram(result.per_utterance);
    const double n = static_cast<double>(std::max<std::size_t>(per_utt.size(), 1));

    Sink sink(opt.out, out);
    sink.stream() << "utterance_id,layer,head,f1\n";
    for (const auto& [utt, o] : per_utt) {
        sink.stream() << utt << ',' << o.head.layer << ',' << o.head.head << ',' << fixed(o.report.f1) << '\n';
    }
    sink.close();

    if (!opt.histogram.empty()) {
        Sink h(opt.histogram, out);
        h.stream() << "layer,head,count,fraction\n";
        for (const auto& [head, count] : hist) {
            h.stream() << head.layer << ',' << head.head << ',' << count << ','
                       << fixed(static_cast<double>(count) / n) << '\n';
        }
        h.close();
    }
    if (!opt.scatter.empty()) {
        Sink s(opt.scatter, out);
        std::map<std::string, const std::vector<ScatterPoint>*> by_utt;
        for (const auto& item : items) {
            if (item.value) {
                by_utt[item.value->utterance_id] = &item.value->scatter;
            }
        }
        s.stream() << "utterance_id,layer,head,score,f1\n";
        for (const auto& [utt, points] : by_utt) {
            for (const auto& p : *points) {
                s.stream() << utt << ',' << p.head.layer << ',' << p.head.head << ',' << fixed(p.score) << ','
                           << fixed(p.f1) << '\n';
            }
        }
        s.close();
    }

    std::size_t top20 = 0;
    for (std::size_t i = 0; i < hist.size() && i < 20; ++i) {
        top20 += hist[i].second;
    }
    std::size_t upper = 0;
    for (const auto& [utt, head] : result.per_utterance) {
        upper += head.layer >= layers[utt] / 2 ? 1 : 0;
    }
    std::ostream& console = sink.to_file() ? out : err;
    console << "utterances " << per_utt.size() << "  oracle F1@" << shortest(opt.tolerance_ms) << "ms "
            << fixed(100.0 * result.f1, 1) << '\n';
    if (!per_utt.empty()) {
        console << "most frequent oracle head " << to_string(result.head) << " (" << hist.front().second
                << " utterances)\n";
    }
    console << "top-20 oracle heads cover " << percent(static_cast<double>(top20) / n) << " of utterances\n";
    console << "oracle heads in the upper half of layers: " << percent(static_cast<double>(upper) / n) << '\n';
    return partial ? kPartialFailure : kSuccess;
}

// ─── hit-rate ────────────────────────────────────────────────────────────────

struct HitRateOptions {
    std::vector<std::string> inputs;
    std::string reference;
    std::string criterion = "norm";
    std::vector<std::string> ks = {"1", "5", "10", "20", "all"};
    double tolerance_ms = 50.0;
    std::string out;
    std::size_t jobs = 1;
    bool keep_going = false;
};

struct HitRateItem {
    std::string utterance_id;
    HeadId oracle;
    std::vector<std::vector<HeadId>> selected; // per k
    std::vector<EvalReport> reports;           // per k, at 50 ms
};

int cmd_hit_rate(const HitRateOptions& opt, std::ostream& out, std::ostream& err) {
    const Criterion criterion = criterion_from(opt.criterion);
    std::vector<std::optional<std::size_t>> ks; // nullopt = all heads
    for (const auto& k : opt.ks) {
        if (k == "all") {
            ks.push_back(std::nullopt);
            continue;
        }
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(k, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (used != k.size() || v == 0) {
            throw CLI::ValidationError("--k", "expected a positive integer or 'all', got '" + k + "'");
        }
        ks.push_back(v);
    }
    const SegmentsByUtterance reference = read_reference_alignments_file(opt.reference);
    const double tolerance = opt.tolerance_ms / 1000.0;
    const auto files = resolve_inputs(opt.inputs);

    auto items = parallel_map<HitRateItem>(files.size(), opt.jobs, [&](std::size_t i) {
        const AttentionDump dump = read_dump_file(files[i]);
        const auto& ref = reference_for(reference, dump.utterance_id);
        HitRateItem item{dump.utterance_id, oracle_head(dump, ref, tolerance).head, {}, {}};
        const auto table = score_all(dump, criterion);
        for (const auto& k : ks) {
            const auto sel = select_heads(table, TopK{k.value_or(dump.num_heads())}, dump);
            item.reports.push_back(boundary_f1(align_with_heads(dump, sel.heads), ref, 0.050));
            item.selected.push_back(sel.heads);
        }
        return item;
    });

    bool partial = false;
    if (auto code = report_failures(items, files, opt.keep_going, err, partial)) {
        return *code;
    }
    if (auto code = check_unique_ids(items, err)) {
        return *code;
    }

    std::map<std::string, HeadId> oracle;
    for (const auto& item : items) {
        if (item.value) {
            oracle[item.value->utterance_id] = item.value->oracle;
        }
    }
    Sink sink(opt.out, out);
    std::ostream& console = sink.to_file() ? out : err;
    sink.stream() << "k,f1_50ms,hit_rate\n";
    console << "k      F1@50ms  hit rate\n";
    for (std::size_t j = 0; j < ks.size(); ++j) {
        std::map<std::string, std::vector<HeadId>> selected;
        std::vector<EvalReport> reports;
        for (const auto& item : items) {
            if (item.value) {
                selected[item.value->utterance_id] = item.value->selected[j];
                reports.push_back(item.value->reports[j]);
            }
        }
        const double f1 = pool_reports(reports).f1;
        const double rate = hit_rate(selected, oracle);
        sink.stream() << opt.ks[j] << ',' << fixed(f1) << ',' << fixed(rate) << '\n';
        char line[96];
        std::snprintf(line, sizeof(line), "%-6s %7.1f  %8.1f\n", opt.ks[j].c_str(), 100.0 * f1, 100.0 * rate);
        console << line;
    }
    sink.close();
    return partial ? kPartialFailure : kSuccess;
}

// ─── sweep ───────────────────────────────────────────────────────────────────

struct SweepOptions {
    std::vector<std::string> inputs;
    std::string reference;
    std::vector<std::string> criteria = {"norm", "col-norm", "row-norm", "entropy", "coverage"};
    std::size_t top_k = 10;
    std::vector<double> tolerances_ms = kDefaultTolerancesMs;
    std::string out;
    std::size_t jobs = 1;
    bool keep_going = false;
};

struct SweepItem {
    std::string utterance_id;
    std::vector<std::vector<EvalReport>> reports; // [criterion][tolerance]
};

int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
    std::vector<Criterion> criteria;
    for (const auto& name : opt.criteria) {
        criteria.push_back(criterion_from(name));
    }
    const SegmentsByUtterance reference = read_reference_alignments_file(opt.reference);
    const auto tolerances = seconds(opt.tolerances_ms);
    const auto files = resolve_inputs(opt.inputs);

    auto items = parallel_map<SweepItem>(files.size(), opt.jobs, [&](std::size_t i) {
        const AttentionDump dump = read_dump_file(files[i]);
        const auto& ref = reference_for(reference, dump.utterance_id);
        SweepItem item{dump.utterance_id, {}};
        for (auto c : criteria) {
            item.reports.push_back(tolerance_sweep(align_utterance(dump, TopK{opt.top_k}, c), ref, tolerances));
        }
        return item;
    });

    bool partial = false;
    if (auto code = report_failures(items, files, opt.keep_going, err, partial)) {
        return *code;
    }
    if (auto code = check_unique_ids(items, err)) {
        return *code;
    }

    Sink sink(opt.out, out);
    std::ostream& console = sink.to_file() ? out : err;
    sink.stream() << "criterion,tolerance_ms,precision,recall,f1,tp,hyp_words,ref_words\n";
    console << "criterion   ";
    for (double ms : opt.tolerances_ms) {
        char col[16];
        std::snprintf(col, sizeof(col), "%7s", (shortest(ms) + "ms").c_str());
        console << col;
    }
    console << '\n';
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        char name[16];
        std::snprintf(name, sizeof(name), "%-12s", opt.criteria[c].c_str());
        console << name;
        for (std::size_t t = 0; t < tolerances.size(); ++t) {
            std::vector<EvalReport> reports;
            for (const auto& item : items) {
                if (item.value) {
                    reports.push_back(item.value->reports[c][t]);
                }
            }
            const auto r = pool_reports(reports);
            sink.stream() << opt.criteria[c] << ',' << shortest(opt.tolerances_ms[t]) << ','
                          << fixed(r.precision) << ',' << fixed(r.recall) << ',' << fixed(r.f1) << ','
                          << r.true_positives << ',' << r.num_hyp_words << ',' << r.num_ref_words << '\n';
            char cell[16];
            std::snprintf(cell, sizeof(cell), "%7.1f", 100.0 * r.f1);
            console << cell;
        }
        console << '\n';
    }
    sink.close();
    return partial ? kPartialFailure : kSuccess;
}

// ─── synth ───────────────────────────────────────────────────────────────────

struct SynthOptions {
    SynthConfig config;
    std::size_t count = 10;
    std::string out_dir;
    double frame_ms = 20.0;
};

int cmd_synth(SynthOptions opt, std::ostream& out, std::ostream& err) {
    opt.config.frame_duration = opt.frame_ms / 1000.0;
    try {
        check_config(opt.config);
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);

    SegmentsByUtterance reference;
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
    if (!manifest) {
        throw IoError("cannot write " + (dir / "manifest.jsonl").string());
    }
    for (std::size_t i = 0; i < opt.count; ++i) {
        auto u = generate_one(opt.config, i);
        write_dump_file(u.dump, dir / (u.dump.utterance_id + ".atnm"));
        nlohmann::json line = {{"utterance_id", u.dump.utterance_id},
                               {"layer", u.ideal_head.layer},
                               {"head", u.ideal_head.head}};
        manifest << line.dump() << '\n';
        reference[u.dump.utterance_id] = std::move(u.truth);
    }
    manifest.close();
    if (!manifest) {
        throw IoError("failed writing manifest");
    }
    write_segments_file(reference, dir / "reference.tsv");
    out << "wrote " << opt.count << " utterances to " << dir.string() << '\n';
    return kSuccess;
}

void add_dump_inputs(CLI::App* cmd, std::vector<std::string>& inputs, std::size_t& jobs, bool& keep_going) {
    cmd->add_option("inputs", inputs, "ATNM dump files or directories of *.atnm")->required();
    cmd->add_option("-j,--jobs", jobs, "Worker threads (0 = all cores)")->capture_default_str();
    cmd->add_flag("--keep-going", keep_going, "Skip unreadable dumps instead of stopping");
}

} // namespace

std::vector<std::string> config_flags(const std::string& path, const std::vector<std::string>& args) {
    std::ifstream in(path);
    if (!in) {
        throw CLI::FileError::Missing(path);
    }
    std::vector<std::string> flags;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw CLI::ConversionError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string flag = "--" + key;
        const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (given) {
            continue;
        }
        if (value == "true") {
            flags.push_back(flag);
        } else if (value != "false") {
            flags.push_back(flag);
            flags.push_back(value);
        }
    }
    return flags;
}

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Word timestamps from cross-attention maps: align, evaluate, analyze heads", "attnalign"};
    app.require_subcommand(1);

    // --config is consumed here; its keys become flags unless given explicitly.
    std::vector<std::string> args;
    std::string config_path;
    for (std::size_t i = 0; i < args_in.size(); ++i) {
        if (args_in[i] == "--config" && i + 1 < args_in.size()) {
            config_path = args_in[++i];
        } else if (args_in[i].rfind("--config=", 0) == 0) {
            config_path = args_in[i].substr(9);
        } else {
            args.push_back(args_in[i]);
        }
    }

    AlignOptions align_opt;
    auto* align = app.add_subcommand("align", "Align words to frames for each dump; writes a segment TSV");
    add_dump_inputs(align, align_opt.inputs, align_opt.jobs, align_opt.keep_going);
    add_criterion_option(align, align_opt.criterion);
    auto* top_k = align->add_option("--top-k", align_opt.top_k, "Average the K best-scoring heads")
                      ->check(CLI::PositiveNumber)
                      ->capture_default_str();
    auto* upper = align->add_flag("--upper-half", align_opt.upper_half, "Average every head of the upper layers");
    auto* fixed_heads = align->add_option("--fixed-heads", align_opt.fixed_heads, "Average LAYER:HEAD,...");
    auto* oracle = align->add_flag("--oracle", align_opt.oracle, "Use each utterance's best head (needs --reference)");
    top_k->excludes(upper)->excludes(fixed_heads)->excludes(oracle);
    upper->excludes(fixed_heads)->excludes(oracle);
    fixed_heads->excludes(oracle);
    align->add_option("--reference", align_opt.reference, "Reference TSV (for --oracle)");
    align->add_option("--tolerance-ms", align_opt.tolerance_ms, "Oracle tolerance")->capture_default_str();
    align->add_option("-o,--out", align_opt.out, "Output TSV (default stdout)");

    EvalOptions eval_opt;
    auto* eval = app.add_subcommand("eval", "Strict boundary F1 of predicted word ends");
    eval->add_option("--pred", eval_opt.predictions, "Predicted segment TSV")->required();
    eval->add_option("--ref", eval_opt.reference, "Reference segment TSV")->required();
    eval->add_option("--tolerances", eval_opt.tolerances_ms, "Tolerances in ms")
        ->delimiter(',')
        ->capture_default_str();
    eval->add_option("-o,--out", eval_opt.out, "CSV report (default stdout)");
    eval->add_flag("--macro", eval_opt.macro, "Average per utterance instead of pooling counts");
    eval->add_flag("--strict", eval_opt.strict, "Fail when a predicted utterance has no reference");

    OracleOptions oracle_opt;
    auto* oracle_cmd = app.add_subcommand("oracle", "Find each utterance's best single head");
    add_dump_inputs(oracle_cmd, oracle_opt.inputs, oracle_opt.jobs, oracle_opt.keep_going);
    oracle_cmd->add_option("--reference", oracle_opt.reference, "Reference TSV")->required();
    oracle_cmd->add_option("--tolerance-ms", oracle_opt.tolerance_ms, "F1 tolerance")->capture_default_str();
    add_criterion_option(oracle_cmd, oracle_opt.criterion);
    oracle_cmd->add_option("-o,--out", oracle_opt.out, "Per-utterance oracle CSV (default stdout)");
    oracle_cmd->add_option("--histogram", oracle_opt.histogram, "Oracle head frequency CSV");
    oracle_cmd->add_option("--scatter", oracle_opt.scatter, "Per-head score vs F1 CSV");

    HitRateOptions hit_opt;
    auto* hit = app.add_subcommand("hit-rate", "F1 and oracle hit rate when keeping the top k heads");
    add_dump_inputs(hit, hit_opt.inputs, hit_opt.jobs, hit_opt.keep_going);
    hit->add_option("--reference", hit_opt.reference, "Reference TSV")->required();
    add_criterion_option(hit, hit_opt.criterion);
    hit->add_option("--k", hit_opt.ks, "Head counts, integers or 'all'")->delimiter(',')->capture_default_str();
    hit->add_option("--tolerance-ms", hit_opt.tolerance_ms, "Oracle tolerance")->capture_default_str();
    hit->add_option("-o,--out", hit_opt.out, "CSV (default stdout)");

    SweepOptions sweep_opt;
    auto* sweep = app.add_subcommand("sweep", "F1 over tolerances for each head-scoring criterion");
    add_dump_inputs(sweep, sweep_opt.inputs, sweep_opt.jobs, sweep_opt.keep_going);
    sweep->add_option("--reference", sweep_opt.reference, "Reference TSV")->required();
    sweep->add_option("--criteria", sweep_opt.criteria, "Criteria to compare")
        ->delimiter(',')
        ->check(CLI::IsMember({"norm", "col-norm", "row-norm", "entropy", "coverage"}))
        ->capture_default_str();
    sweep->add_option("--top-k", sweep_opt.top_k, "Heads to average")->check(CLI::PositiveNumber)->capture_default_str();
    sweep->add_option("--tolerances", sweep_opt.tolerances_ms, "Tolerances in ms")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("-o,--out", sweep_opt.out, "CSV (default stdout)");

    SynthOptions synth_opt;
    auto& sc = synth_opt.config;
    auto* synth = app.add_subcommand("synth", "Write synthetic dumps, reference TSV and ideal-head manifest");
    synth->add_option("--out", synth_opt.out_dir, "Output directory")->required();
    synth->add_option("--seed", sc.rng_seed, "RNG seed")->capture_default_str();
    synth->add_option("--count", synth_opt.count, "Number of utterances")->capture_default_str();
    synth->add_option("--layers", sc.num_layers, "Decoder layers")->capture_default_str();
    synth->add_option("--heads", sc.heads_per_layer, "Heads per layer")->capture_default_str();
    synth->add_option("--sharpness", sc.ideal_sharpness, "Ideal head concentration (>= 1)")->capture_default_str();
    synth->add_option("--frame-ms", synth_opt.frame_ms, "Frame duration")->capture_default_str();
    synth->add_option("--min-words", sc.num_words.min, "Fewest words per utterance")->capture_default_str();
    synth->add_option("--max-words", sc.num_words.max, "Most words per utterance")->capture_default_str();
    synth->add_option("--uniform", sc.distractors.uniform, "Uniform distractor heads")->capture_default_str();
    synth->add_option("--noise", sc.distractors.noise, "Random-row distractor heads")->capture_default_str();
    synth->add_option("--shifted", sc.distractors.shifted, "Shifted distractor heads")->capture_default_str();
    synth->add_option("--repeated", sc.distractors.repeated, "Two-bump distractor heads")->capture_default_str();
    synth->add_option("--blurry", sc.distractors.blurry, "Blurred distractor heads")->capture_default_str();

    try {
        if (!config_path.empty()) {
            auto extra = config_flags(config_path, args);
            args.insert(args.end(), extra.begin(), extra.end());
        }
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (align->parsed() && align_opt.oracle && align_opt.reference.empty()) {
            throw CLI::RequiredError("--reference (required by --oracle)");
        }
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (align->parsed()) {
            return cmd_align(align_opt, out, err);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_opt, out, err);
        }
        if (oracle_cmd->parsed()) {
            return cmd_oracle(oracle_opt, out, err);
        }
        if (hit->parsed()) {
            return cmd_hit_rate(hit_opt, out, err);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_opt, out, err);
        }
        if (synth->parsed()) {
            return cmd_synth(synth_opt, out, err);
        }
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

} // namespace attnalign::cli
