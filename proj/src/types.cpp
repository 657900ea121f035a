#include "attnalign/types.hpp"

#include <cmath>

namespace attnalign {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        return {};
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) {
            throw DomainError("Matrix::from_rows: ragged rows");
        }
        for (std::size_t c = 0; c < m.cols(); ++c) {
            m(r, c) = rows[r][c];
        }
    }
    return m;
}

std::string to_string(const HeadId& id) {
    return std::to_string(id.layer) + ":" + std::to_string(id.head);
}

Matrix AttentionDump::head_map(const HeadId& id) const {
    if (!contains(id)) {
        throw DomainError("head " + to_string(id) + " out of bounds");
    }
    Matrix m(num_tokens, num_frames);
    auto w = head_weights(id);
    for (std::size_t k = 0; k < num_tokens; ++k) {
        for (std::size_t t = 0; t < num_frames; ++t) {
            m(k, t) = static_cast<double>(w[k * num_frames + t]);
        }
    }
    return m;
}

std::vector<HeadId> AttentionDump::all_heads() const {
    std::vector<HeadId> ids;
    ids.reserve(num_heads());
    for (std::size_t l = 0; l < num_layers; ++l) {
        for (std::size_t h = 0; h < heads_per_layer; ++h) {
            ids.push_back({l, h});
        }
    }
    return ids;
}

void validate(const AttentionDump& dump, double row_tolerance) {
    if (dump.num_layers == 0 || dump.heads_per_layer == 0 || dump.num_tokens == 0 ||
        dump.num_frames == 0) {
        throw DomainError("dump '" + dump.utterance_id + "': all dimensions must be positive");
    }
    if (!(dump.frame_duration_ms > 0.0f) || !std::isfinite(dump.frame_duration_ms)) {
        throw DomainError("dump '" + dump.utterance_id + "': frame duration must be > 0");
    }
    if (dump.tokens.size() != dump.num_tokens) {
        throw DomainError("dump '" + dump.utterance_id + "': token table has " +
                          std::to_string(dump.tokens.size()) + " entries, expected " +
                          std::to_string(dump.num_tokens));
    }
    if (dump.weights.size() != dump.num_heads() * dump.num_tokens * dump.num_frames) {
        throw DomainError("dump '" + dump.utterance_id + "': weight count does not match shape");
    }
    std::optional<std::size_t> last_word;
    for (const auto& tok : dump.tokens) {
        if (!tok.word_index) {
            continue;
        }
        if (last_word && *tok.word_index < *last_word) {
            throw DomainError("dump '" + dump.utterance_id + "': word indices decrease");
        }
        last_word = tok.word_index;
    }
    for (const auto& id : dump.all_heads()) {
        auto w = dump.head_weights(id);
        for (std::size_t k = 0; k < dump.num_tokens; ++k) {
            double sum = 0.0;
            for (std::size_t t = 0; t < dump.num_frames; ++t) {
                float v = w[k * dump.num_frames + t];
                if (!(v >= 0.0f && v <= 1.0f)) {
                    throw DomainError("dump '" + dump.utterance_id + "': weight outside [0,1] at head " +
                                      to_string(id) + " row " + std::to_string(k));
                }
                sum += v;
            }
            if (std::abs(sum - 1.0) > row_tolerance) {
                throw DomainError("dump '" + dump.utterance_id + "': row " + std::to_string(k) +
                                  " of head " + to_string(id) + " sums to " + std::to_string(sum));
            }
        }
    }
}

} // namespace attnalign
