#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace clh {

/// One retrieval hit. Rankings are sorted by descending score; equal scores
/// fall back to ascending id so every ranking is a total order.
struct ScoredHit {
    std::uint32_t id = 0;
    double score = 0.0;

    friend bool operator==(const ScoredHit& a, const ScoredHit& b) {
        return a.id == b.id && a.score == b.score;
    }
};

inline void sort_ranking(std::vector<ScoredHit>& hits) {
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
}

inline void truncate_ranking(std::vector<ScoredHit>& hits, std::size_t k) {
    if (hits.size() > k) hits.resize(k);
}

} // namespace clh
