#include "attnalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "attnalign/tokenization.hpp"

namespace attnalign {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Distributions are derived by hand from the engine's raw output so that
// generated corpora do not depend on the standard library's distribution code.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t range(std::size_t lo, std::size_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::size_t>(engine_() % span);
    }

    std::size_t range(const IntRange& r) { return range(r.min, r.max); }

    bool coin() { return (engine_() >> 63) != 0; }

    double exponential() { return -std::log1p(-uniform()); }

private:
    std::mt19937_64 engine_;
};

using Row = std::vector<double>;

void normalize(Row& row) {
    double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (sum <= 0.0) {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
        return;
    }
    for (double& v : row) {
        v /= sum;
    }
}

// Concentration-shaped bump over [a, b], zero elsewhere.
Row bump(std::size_t frames, FrameSpan span, double sharpness) {
    Row row(frames, 0.0);
    const std::size_t len = span.end - span.start + 1;
    if (!std::isfinite(sharpness) || len == 1) {
        row[span.start + (len - 1) / 2] = 1.0;
        return row;
    }
    const double center = (static_cast<double>(span.start) + static_cast<double>(span.end) + 1.0) / 2.0;
    const double width = static_cast<double>(len);
    for (std::size_t t = span.start; t <= span.end; ++t) {
        const double x = (static_cast<double>(t) + 0.5 - center) / width;
        row[t] = std::exp(-sharpness * x * x);
    }
    normalize(row);
    return row;
}

// Moves `row` by `offset` frames; mass pushed past either end is dropped.
Row translate(const Row& row, long offset) {
    Row out(row.size(), 0.0);
    const long n = static_cast<long>(row.size());
    for (long t = 0; t < n; ++t) {
        const long dst = t + offset;
        if (dst >= 0 && dst < n) {
            out[static_cast<std::size_t>(dst)] = row[static_cast<std::size_t>(t)];
        }
    }
    return out;
}

// Signed offset of magnitude in `range` that keeps `span` inside [0, frames).
long pick_offset(Rng& rng, const IntRange& range, FrameSpan span, std::size_t frames) {
    const long mag = static_cast<long>(rng.range(range));
    const bool fits_left = static_cast<long>(span.start) - mag >= 0;
    const bool fits_right = static_cast<long>(span.end) + mag < static_cast<long>(frames);
    bool left = rng.coin();
    if (left && !fits_left && fits_right) {
        left = false;
    } else if (!left && !fits_right && fits_left) {
        left = true;
    }
    return left ? -mag : mag;
}

struct Layout {
    std::vector<std::string> words;
    Tokenization tokens;
    std::vector<FrameSpan> spans;
    std::vector<WordSegment> truth;
    std::size_t frames = 0;
};

std::string random_word(Rng& rng, std::size_t len) {
    std::string w;
    for (std::size_t i = 0; i < len; ++i) {
        w.push_back(static_cast<char>('a' + rng.range(0, 25)));
    }
    return w;
}

Layout make_layout(const SynthConfig& cfg, Rng& rng) {
    Layout lay;
    const std::size_t n = rng.range(cfg.num_words);
    for (std::size_t w = 0; w < n; ++w) {
        lay.words.push_back(random_word(rng, rng.range(cfg.word_chars)));
    }
    lay.tokens = to_characters(lay.words);

    std::size_t cursor = rng.range(cfg.leading_silence_frames);
    for (std::size_t w = 0; w < n; ++w) {
        if (w > 0) {
            const std::size_t gap = rng.range(cfg.word_gap_frames);
            // A zero-length gap leaves the space on the next word's first frame.
            lay.spans.push_back({cursor, cursor + (gap > 0 ? gap - 1 : 0)});
            cursor += gap;
        }
        const double cps = rng.uniform(cfg.chars_per_second.min, cfg.chars_per_second.max);
        const auto per_char = static_cast<std::size_t>(
            std::max(1.0, std::round(1.0 / (cps * cfg.frame_duration))));
        const std::size_t word_start = cursor;
        for (std::size_t c = 0; c < split_utf8(lay.words[w]).size(); ++c) {
            lay.spans.push_back({cursor, cursor + per_char - 1});
            cursor += per_char;
        }
        lay.truth.push_back({lay.words[w], static_cast<double>(word_start) * cfg.frame_duration,
                             static_cast<double>(cursor) * cfg.frame_duration});
    }
    lay.frames = cursor;
    return lay;
}

std::vector<DistractorKind> head_kinds(const DistractorMix& mix, std::size_t total_heads) {
    std::vector<DistractorKind> kinds;
    kinds.insert(kinds.end(), mix.uniform, DistractorKind::Uniform);
    kinds.insert(kinds.end(), mix.noise, DistractorKind::Noise);
    kinds.insert(kinds.end(), mix.shifted, DistractorKind::Shifted);
    kinds.insert(kinds.end(), mix.repeated, DistractorKind::Repeated);
    kinds.insert(kinds.end(), mix.blurry, DistractorKind::Blurry);
    // Heads not covered by the mix are uniform.
    kinds.resize(total_heads - 1, DistractorKind::Uniform);
    return kinds;
}

Row distractor_row(DistractorKind kind, const Row& ideal, FrameSpan span, const SynthConfig& cfg,
                   std::size_t blur_width, long blur_lag, Rng& rng) {
    const std::size_t frames = ideal.size();
    switch (kind) {
    case DistractorKind::Uniform:
        return Row(frames, 1.0 / static_cast<double>(frames));
    case DistractorKind::Noise: {
        Row row(frames);
        for (double& v : row) {
            v = rng.exponential();
        }
        normalize(row);
        return row;
    }
    case DistractorKind::Shifted: {
        Row row = translate(ideal, pick_offset(rng, cfg.shift_frames, span, frames));
        normalize(row);
        return row;
    }
    case DistractorKind::Repeated: {
        const long before = -static_cast<long>(rng.range(cfg.shift_frames));
        const long after = static_cast<long>(rng.range(cfg.shift_frames));
        Row a = translate(ideal, before);
        Row b = translate(ideal, after);
        Row row(frames);
        for (std::size_t t = 0; t < frames; ++t) {
            row[t] = a[t] + b[t];
        }
        normalize(row);
        return row;
    }
    case DistractorKind::Blurry: {
        const double tau = static_cast<double>(blur_width) / 2.0;
        const long width = static_cast<long>(blur_width);
        const long n = static_cast<long>(frames);
        Row row(frames, 0.0);
        for (long t = 0; t < n; ++t) {
            const double v = ideal[static_cast<std::size_t>(t)];
            if (v == 0.0) {
                continue;
            }
            for (long d = -width; d <= width; ++d) {
                const long dst = t + d + blur_lag;
                if (dst >= 0 && dst < n) {
                    const double x = static_cast<double>(d) / tau;
                    row[static_cast<std::size_t>(dst)] += v * std::exp(-x * x);
                }
            }
        }
        normalize(row);
        return row;
    }
    }
    return ideal;
}

void store_row(AttentionDump& dump, const HeadId& id, std::size_t k, const Row& row) {
    auto w = dump.head_weights(id);
    for (std::size_t t = 0; t < row.size(); ++t) {
        w[k * dump.num_frames + t] = static_cast<float>(row[t]);
    }
}

bool bad_range(const IntRange& r) { return r.min > r.max; }

} // namespace

std::string_view distractor_name(DistractorKind kind) {
    switch (kind) {
    case DistractorKind::Uniform: return "uniform";
    case DistractorKind::Noise: return "noise";
    case DistractorKind::Shifted: return "shifted";
    case DistractorKind::Repeated: return "repeated";
    case DistractorKind::Blurry: return "blurry";
    }
    return "?";
}

void check_config(const SynthConfig& cfg) {
    const std::size_t heads = cfg.num_layers * cfg.heads_per_layer;
    if (cfg.num_layers == 0 || cfg.heads_per_layer == 0) {
        throw DomainError("synth: layers and heads per layer must be positive");
    }
    if (heads < cfg.distractors.total() + 1) {
        throw DomainError("synth: " + std::to_string(cfg.distractors.total()) +
                          " distractors plus the ideal head do not fit in " + std::to_string(heads) +
                          " heads");
    }
    if (bad_range(cfg.num_words) || cfg.num_words.min == 0) {
        throw DomainError("synth: word count range must be non-empty and start at >= 1");
    }
    if (bad_range(cfg.word_chars) || cfg.word_chars.min == 0) {
        throw DomainError("synth: characters per word range must be non-empty and start at >= 1");
    }
    if (bad_range(cfg.word_gap_frames) || bad_range(cfg.leading_silence_frames) ||
        bad_range(cfg.shift_frames) || bad_range(cfg.blur_frames) ||
        bad_range(cfg.blur_lag_frames)) {
        throw DomainError("synth: empty frame range");
    }
    if (cfg.shift_frames.min < 3) {
        throw DomainError("synth: shift offsets must be at least 3 frames");
    }
    if (!(cfg.frame_duration > 0.0) || !std::isfinite(cfg.frame_duration)) {
        throw DomainError("synth: frame duration must be positive");
    }
    if (!(cfg.chars_per_second.min > 0.0) || cfg.chars_per_second.min > cfg.chars_per_second.max ||
        !std::isfinite(cfg.chars_per_second.max)) {
        throw DomainError("synth: characters per second range must be positive and non-empty");
    }
    if (!(cfg.ideal_sharpness >= 1.0)) {
        throw DomainError("synth: ideal sharpness must be >= 1");
    }
}

std::uint64_t utterance_seed(std::uint64_t rng_seed, std::uint64_t index) {
    return splitmix64(rng_seed ^ splitmix64(index));
}

SynthUtterance generate_one(const SynthConfig& cfg, std::size_t index) {
    check_config(cfg);
    Rng rng(utterance_seed(cfg.rng_seed, index));
    Layout lay = make_layout(cfg, rng);

    SynthUtterance u;
    char id[32];
    std::snprintf(id, sizeof(id), "synth%05zu", index);
    AttentionDump& d = u.dump;
    d.utterance_id = id;
    d.num_layers = cfg.num_layers;
    d.heads_per_layer = cfg.heads_per_layer;
    d.num_tokens = lay.tokens.tokens.size();
    d.num_frames = lay.frames;
    d.frame_duration_ms = static_cast<float>(cfg.frame_duration * 1000.0);
    d.tokens = lay.tokens.tokens;
    d.weights.assign(d.num_heads() * d.num_tokens * d.num_frames, 0.0f);

    const std::size_t total = d.num_heads();
    const std::size_t ideal_index = rng.range(0, total - 1);
    u.ideal_head = {ideal_index / cfg.heads_per_layer, ideal_index % cfg.heads_per_layer};

    // Distractor kinds are dealt to the remaining heads in a seeded shuffle.
    auto kinds = head_kinds(cfg.distractors, total);
    for (std::size_t i = kinds.size(); i > 1; --i) {
        std::swap(kinds[i - 1], kinds[rng.range(0, i - 1)]);
    }

    std::vector<Row> ideal_rows;
    ideal_rows.reserve(d.num_tokens);
    for (std::size_t k = 0; k < d.num_tokens; ++k) {
        ideal_rows.push_back(bump(d.num_frames, lay.spans[k], cfg.ideal_sharpness));
        store_row(d, u.ideal_head, k, ideal_rows.back());
    }

    std::size_t next_kind = 0;
    for (std::size_t h = 0; h < total; ++h) {
        if (h == ideal_index) {
            continue;
        }
        const HeadId id{h / cfg.heads_per_layer, h % cfg.heads_per_layer};
        const DistractorKind kind = kinds[next_kind++];
        const std::size_t blur = rng.range(cfg.blur_frames);
        const auto lag = static_cast<long>(rng.range(cfg.blur_lag_frames));
        for (std::size_t k = 0; k < d.num_tokens; ++k) {
            store_row(d, id, k, distractor_row(kind, ideal_rows[k], lay.spans[k], cfg, blur, lag, rng));
        }
    }

    u.truth = std::move(lay.truth);
    u.token_spans = std::move(lay.spans);
    return u;
}

std::vector<SynthUtterance> generate(const SynthConfig& cfg, std::size_t count) {
    check_config(cfg);
    std::vector<SynthUtterance> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(generate_one(cfg, i));
    }
    return out;
}

// ─── Brute-force DTW ─────────────────────────────────────────────────────────

namespace {

struct Search {
    const Matrix& cost;
    std::vector<StepKind> steps;
    std::vector<StepKind> best_steps;
    double best_total = std::numeric_limits<double>::infinity();
    bool found = false;

    // Reads both step lists from the end; the first difference decides.
    bool preferred(const std::vector<StepKind>& a, const std::vector<StepKind>& b) const {
        auto ia = a.rbegin();
        auto ib = b.rbegin();
        for (; ia != a.rend() && ib != b.rend(); ++ia, ++ib) {
            if (*ia != *ib) {
                return static_cast<int>(*ia) < static_cast<int>(*ib);
            }
        }
        return false;
    }

    void walk(std::size_t i, std::size_t j, double total) {
        if (i + 1 == cost.rows() && j + 1 == cost.cols()) {
            if (!found || total < best_total || (total == best_total && preferred(steps, best_steps))) {
                best_total = total;
                best_steps = steps;
                found = true;
            }
            return;
        }
        if (i + 1 < cost.rows() && j + 1 < cost.cols()) {
            steps.push_back(StepKind::Diagonal);
            walk(i + 1, j + 1, total + cost(i + 1, j + 1));
            steps.pop_back();
        }
        if (j + 1 < cost.cols()) {
            steps.push_back(StepKind::Horizontal);
            walk(i, j + 1, total + cost(i, j + 1));
            steps.pop_back();
        }
        if (i + 1 < cost.rows()) {
            steps.push_back(StepKind::Vertical);
            walk(i + 1, j, total + cost(i + 1, j));
            steps.pop_back();
        }
    }
};

} // namespace

DtwResult brute_force_dtw(const Matrix& cost) {
    if (cost.empty()) {
        throw DomainError("brute_force_dtw: empty cost matrix");
    }
    if (cost.rows() > kBruteForceMaxRows || cost.cols() > kBruteForceMaxCols) {
        throw DomainError("brute_force_dtw: " + std::to_string(cost.rows()) + "x" +
                          std::to_string(cost.cols()) + " exceeds the enumeration bound");
    }
    Search search{cost, {}, {}};
    search.walk(0, 0, cost(0, 0));

    DtwResult result;
    result.total_cost = search.best_total;
    PathStep at{0, 0};
    result.path.push_back(at);
    for (auto step : search.best_steps) {
        if (step != StepKind::Horizontal) {
            ++at.row;
        }
        if (step != StepKind::Vertical) {
            ++at.col;
        }
        result.path.push_back(at);
    }
    return result;
}

} // namespace attnalign
