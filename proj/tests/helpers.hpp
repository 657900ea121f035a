#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "attnalign/tokenization.hpp"
#include "attnalign/types.hpp"

namespace testutil {

using namespace attnalign;

// Character-token dump for `words` whose head (l, h) map is fill(l, h, row, col);
// rows are normalized afterwards.
inline AttentionDump make_dump(const std::vector<std::string>& words, std::size_t layers, std::size_t heads,
                               std::size_t frames,
                               const std::function<double(std::size_t, std::size_t, std::size_t, std::size_t)>& fill,
                               std::string id = "utt") {
    AttentionDump d;
    d.utterance_id = std::move(id);
    d.num_layers = layers;
    d.heads_per_layer = heads;
    d.tokens = to_characters(words).tokens;
    d.num_tokens = d.tokens.size();
    d.num_frames = frames;
    d.frame_duration_ms = 20.0f;
    d.weights.resize(layers * heads * d.num_tokens * frames);
    for (std::size_t l = 0; l < layers; ++l) {
        for (std::size_t h = 0; h < heads; ++h) {
            auto w = d.head_weights({l, h});
            for (std::size_t k = 0; k < d.num_tokens; ++k) {
                double sum = 0.0;
                std::vector<double> row(frames);
                for (std::size_t t = 0; t < frames; ++t) {
                    row[t] = fill(l, h, k, t);
                    sum += row[t];
                }
                for (std::size_t t = 0; t < frames; ++t) {
                    w[k * frames + t] = static_cast<float>(row[t] / sum);
                }
            }
        }
    }
    return d;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            m(r, c) = u(rng);
        }
    }
    return m;
}

inline Matrix random_stochastic(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    Matrix m = random_matrix(rng, rows, cols, 0.0, 1.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (double v : m.row(r)) {
            s += v;
        }
        for (double& v : m.row(r)) {
            v /= s;
        }
    }
    return m;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("attnalign-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

} // namespace testutil
