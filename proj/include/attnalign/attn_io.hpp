#pragma once

// Readers and writers for the on-disk formats:
//
//  ATNM attention dump (little-endian throughout)
//    magic "ATNM" | u32 version = 1
//    u32 id_len | id bytes (UTF-8)
//    u32 L | u32 Hh | u32 K | u32 T | f32 frame_duration_ms
//    K × { u32 text_len | text bytes | i32 word_index (-1 = none) }
//    L·Hh·K·T × f32, index order (layer, head, token, frame)
//
//  Segment TSV
//    utterance_id <TAB> word <TAB> start_seconds <TAB> end_seconds
//    '#' lines are comments, blank lines are skipped.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "attnalign/types.hpp"

namespace attnalign {

inline constexpr char kAtnmMagic[4] = {'A', 'T', 'N', 'M'};
inline constexpr std::uint32_t kAtnmVersion = 1;

// Rows whose sum is off by more than this are renormalized on read.
inline constexpr double kRenormalizeTolerance = 1e-3;

using SegmentsByUtterance = std::map<std::string, std::vector<WordSegment>>;

void write_dump(const AttentionDump& dump, std::ostream& out);
std::vector<char> encode_dump(const AttentionDump& dump);
void write_dump_file(const AttentionDump& dump, const std::filesystem::path& path);

AttentionDump read_dump(std::istream& in);
AttentionDump decode_dump(std::span<const char> bytes);
AttentionDump read_dump_file(const std::filesystem::path& path);

SegmentsByUtterance read_reference_alignments(std::istream& in);
SegmentsByUtterance read_reference_alignments_file(const std::filesystem::path& path);

// Times are written with 3 decimals; rows ordered by utterance id, then start.
void write_segments(const SegmentsByUtterance& segments, std::ostream& out);
void write_segments_file(const SegmentsByUtterance& segments, const std::filesystem::path& path);

} // namespace attnalign
