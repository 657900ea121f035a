#include "attnalign/attn_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace attnalign {

namespace {

template <typename T>
T to_little_endian(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::little) {
        return value;
    } else {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
}

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        value = to_little_endian(value);
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        buf_.insert(buf_.end(), raw, raw + sizeof(T));
    }

    void put_string(const std::string& s) {
        if (s.size() > std::numeric_limits<std::uint32_t>::max()) {
            throw DomainError("string too long for ATNM");
        }
        put(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    std::vector<char> take() { return std::move(buf_); }
    void reserve(std::size_t n) { buf_.reserve(n); }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_little_endian(value);
    }

    std::string get_string(const char* what) {
        auto len = get<std::uint32_t>(what);
        need(len, what);
        std::string s(bytes_.data() + pos_, len);
        pos_ += len;
        return s;
    }

    void need(std::size_t n, const char* what) const {
        if (n > remaining()) {
            throw LengthError(std::string("ATNM truncated while reading ") + what + ": need " +
                              std::to_string(n) + " bytes, " + std::to_string(remaining()) +
                              " remain");
        }
    }

private:
    std::span<const char> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw DomainError(std::string("ATNM: ") + what + " does not fit in u32");
    }
    return static_cast<std::uint32_t>(v);
}

std::string location(std::size_t layer, std::size_t head, std::size_t row) {
    return "layer " + std::to_string(layer) + ", head " + std::to_string(head) + ", row " +
           std::to_string(row);
}

} // namespace

std::vector<char> encode_dump(const AttentionDump& dump) {
    if (dump.tokens.size() != dump.num_tokens ||
        dump.weights.size() != dump.num_heads() * dump.num_tokens * dump.num_frames) {
        throw DomainError("write_dump: dump '" + dump.utterance_id + "' has inconsistent shape");
    }
    ByteWriter w;
    w.reserve(64 + dump.weights.size() * sizeof(float));
    for (char c : kAtnmMagic) {
        w.put(c);
    }
    w.put(kAtnmVersion);
    w.put_string(dump.utterance_id);
    w.put(checked_u32(dump.num_layers, "L"));
    w.put(checked_u32(dump.heads_per_layer, "Hh"));
    w.put(checked_u32(dump.num_tokens, "K"));
    w.put(checked_u32(dump.num_frames, "T"));
    w.put(dump.frame_duration_ms);
    for (const auto& tok : dump.tokens) {
        w.put_string(tok.text);
        std::int32_t idx = -1;
        if (tok.word_index) {
            if (*tok.word_index > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
                throw DomainError("write_dump: word index too large");
            }
            idx = static_cast<std::int32_t>(*tok.word_index);
        }
        w.put(idx);
    }
    for (float v : dump.weights) {
        w.put(v);
    }
    return w.take();
}

void write_dump(const AttentionDump& dump, std::ostream& out) {
    auto bytes = encode_dump(dump);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write_dump: failed writing dump '" + dump.utterance_id + "'");
    }
}

void write_dump_file(const AttentionDump& dump, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_dump(dump, out);
    out.close();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

AttentionDump decode_dump(std::span<const char> bytes) {
    ByteReader r(bytes);
    r.need(4, "magic");
    char magic[4];
    for (char& c : magic) {
        c = r.get<char>("magic");
    }
    if (std::memcmp(magic, kAtnmMagic, 4) != 0) {
        throw FormatError("not an ATNM file (bad magic)");
    }
    auto version = r.get<std::uint32_t>("version");
    if (version != kAtnmVersion) {
        throw FormatError("unsupported ATNM version " + std::to_string(version));
    }

    AttentionDump d;
    d.utterance_id = r.get_string("utterance id");
    d.num_layers = r.get<std::uint32_t>("L");
    d.heads_per_layer = r.get<std::uint32_t>("Hh");
    d.num_tokens = r.get<std::uint32_t>("K");
    d.num_frames = r.get<std::uint32_t>("T");
    d.frame_duration_ms = r.get<float>("frame duration");
    if (d.num_layers == 0 || d.heads_per_layer == 0 || d.num_tokens == 0 || d.num_frames == 0) {
        throw FormatError("ATNM header has a zero dimension");
    }
    if (!std::isfinite(d.frame_duration_ms) || d.frame_duration_ms <= 0.0f) {
        throw FormatError("ATNM frame duration must be positive");
    }

    d.tokens.reserve(std::min<std::size_t>(d.num_tokens, r.remaining()));
    for (std::size_t k = 0; k < d.num_tokens; ++k) {
        TokenRecord tok;
        tok.text = r.get_string("token text");
        auto idx = r.get<std::int32_t>("word index");
        if (idx < -1) {
            throw FormatError("ATNM token " + std::to_string(k) + " has invalid word index " +
                              std::to_string(idx));
        }
        if (idx >= 0) {
            tok.word_index = static_cast<std::size_t>(idx);
        }
        d.tokens.push_back(std::move(tok));
    }

    // Guard the product against the bytes present before multiplying it out.
    const std::size_t row_len = d.num_frames;
    const std::size_t avail = r.remaining() / sizeof(float);
    std::size_t count = 1;
    for (std::size_t dim : {d.num_layers, d.heads_per_layer, d.num_tokens, d.num_frames}) {
        if (count > avail / dim) {
            throw LengthError("ATNM payload declares more weights than the " +
                              std::to_string(r.remaining()) + " remaining bytes hold");
        }
        count *= dim;
    }
    r.need(count * sizeof(float), "payload");
    if (r.remaining() != count * sizeof(float)) {
        throw FormatError("ATNM has " + std::to_string(r.remaining() - count * sizeof(float)) +
                          " trailing bytes");
    }

    d.weights.resize(count);
    for (auto& v : d.weights) {
        v = r.get<float>("payload");
    }

    for (std::size_t l = 0; l < d.num_layers; ++l) {
        for (std::size_t h = 0; h < d.heads_per_layer; ++h) {
            auto w = d.head_weights({l, h});
            for (std::size_t k = 0; k < d.num_tokens; ++k) {
                auto row = w.subspan(k * row_len, row_len);
                double sum = 0.0;
                for (float v : row) {
                    if (!std::isfinite(v) || v < 0.0f) {
                        throw DataError("ATNM weight is NaN, infinite or negative at " +
                                        location(l, h, k));
                    }
                    sum += v;
                }
                if (std::abs(sum - 1.0) > kRenormalizeTolerance) {
                    if (sum <= 0.0) {
                        throw DataError("ATNM attention row sums to zero at " + location(l, h, k));
                    }
                    for (float& v : row) {
                        v = static_cast<float>(v / sum);
                    }
                    ++d.renormalized_rows;
                }
            }
        }
    }
    return d;
}

AttentionDump read_dump(std::istream& in) {
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (in.bad()) {
        throw IoError("read_dump: stream error");
    }
    return decode_dump(bytes);
}

AttentionDump read_dump_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return read_dump(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const LengthError& e) {
        throw LengthError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// ─── Segment TSV ─────────────────────────────────────────────────────────────

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto tab = line.find('\t', pos);
        out.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
        if (tab == std::string_view::npos) {
            break;
        }
        pos = tab + 1;
    }
    return out;
}

double parse_seconds(std::string_view field, std::size_t line_no, const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": " + what + " '" +
                         std::string(field) + "' is not a number");
    }
    return v;
}

} // namespace

SegmentsByUtterance read_reference_alignments(std::istream& in) {
    SegmentsByUtterance out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != 4) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 4 tab-separated columns, got " +
                             std::to_string(fields.size()));
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": empty utterance id or word");
        }
        WordSegment seg;
        seg.word = std::string(fields[1]);
        seg.start = parse_seconds(fields[2], line_no, "start");
        seg.end = parse_seconds(fields[3], line_no, "end");
        if (seg.start < 0.0) {
            throw ParseError("line " + std::to_string(line_no) + ": negative start time");
        }
        if (seg.end < seg.start) {
            throw ParseError("line " + std::to_string(line_no) + ": end " + std::string(fields[3]) +
                             " precedes start " + std::string(fields[2]));
        }
        out[std::string(fields[0])].push_back(std::move(seg));
    }
    if (in.bad()) {
        throw IoError("read_reference_alignments: stream error");
    }
    return out;
}

SegmentsByUtterance read_reference_alignments_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return read_reference_alignments(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_segments(const SegmentsByUtterance& segments, std::ostream& out) {
    char buf[64];
    for (const auto& [utt, segs] : segments) {
        std::vector<const WordSegment*> order;
        order.reserve(segs.size());
        for (const auto& s : segs) {
            order.push_back(&s);
        }
        std::stable_sort(order.begin(), order.end(),
                         [](const WordSegment* a, const WordSegment* b) { return a->start < b->start; });
        for (const auto* s : order) {
            std::snprintf(buf, sizeof(buf), "\t%.3f\t%.3f\n", s->start, s->end);
            out << utt << '\t' << s->word << buf;
        }
    }
    if (!out) {
        throw IoError("write_segments: failed writing output");
    }
}

void write_segments_file(const SegmentsByUtterance& segments, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_segments(segments, out);
    out.close();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace attnalign
