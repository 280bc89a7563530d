#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "clh/hash.hpp"
#include "clh/tokenize.hpp"

namespace clh {

/// Text-to-vector interface. Implementations must be deterministic for a
/// fixed configuration: equal text in, equal vector out.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<float> embed(const std::string& text) const = 0;

    std::vector<std::vector<float>> embed_all(const std::vector<std::string>& texts) const {
        std::vector<std::vector<float>> out;
        out.reserve(texts.size());
        for (const auto& text : texts) out.push_back(embed(text));
        return out;
    }
};

/// Seeded feature-hashing embedder: character trigrams of the normalized
/// text are hashed into sign buckets and the result is L2-normalized.
/// Cheap, dependency-free, and stable across platforms, which makes it the
/// reference embedder for tests and offline runs.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0x9e3779b97f4a7c15ULL)
        : dim_(dim), state0_(0xcbf29ce484222325ULL ^ seed) {}

    std::size_t dim() const override { return dim_; }

    std::vector<float> embed(const std::string& text) const override {
        std::vector<float> vec(dim_, 0.0f);
        std::string normalized = normalize(text);
        if (normalized.size() < 3) {
            if (!normalized.empty()) bump(vec, normalized);
        } else {
            for (std::size_t i = 0; i + 3 <= normalized.size(); ++i) {
                bump(vec, std::string_view(normalized).substr(i, 3));
            }
        }
        double norm2 = 0.0;
        for (float v : vec) norm2 += static_cast<double>(v) * static_cast<double>(v);
        if (norm2 == 0.0) {
            vec[0] = 1.0f; // canonical unit vector for contentless text
            return vec;
        }
        float inv = static_cast<float>(1.0 / std::sqrt(norm2));
        for (float& v : vec) v *= inv;
        return vec;
    }

private:
    static std::string normalize(const std::string& text) {
        auto tokens = tokenize(text);
        std::string joined;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) joined.push_back(' ');
            joined += tokens[i];
        }
        return joined;
    }

    void bump(std::vector<float>& vec, std::string_view gram) const {
        std::uint64_t h = fnv1a64(gram, state0_);
        std::size_t bucket = static_cast<std::size_t>((h >> 1) % dim_);
        vec[bucket] += (h & 1ULL) ? 1.0f : -1.0f;
    }

    std::size_t dim_;
    std::uint64_t state0_;
};

} // namespace clh
