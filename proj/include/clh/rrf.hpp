#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "clh/ranking.hpp"

namespace clh {

struct RrfParams {
    double k = 60.0;           // rank dampening constant
    std::size_t fuse_depth = 100; // how deep each input ranking contributes
};

/// Reciprocal-rank fusion: each input ranking contributes 1/(k + rank) for
/// its first fuse_depth entries, with rank counted from 1. Items absent
/// from a ranking contribute nothing for it.
inline std::vector<ScoredHit> rrf_fuse(const std::vector<std::vector<ScoredHit>>& rankings,
                                       RrfParams params = {}) {
    std::map<std::uint32_t, double> scores;
    for (const auto& ranking : rankings) {
        std::size_t depth = std::min(ranking.size(), params.fuse_depth);
        for (std::size_t pos = 0; pos < depth; ++pos) {
            scores[ranking[pos].id] += 1.0 / (params.k + static_cast<double>(pos + 1));
        }
    }
    std::vector<ScoredHit> fused;
    fused.reserve(scores.size());
    for (const auto& [id, score] : scores) fused.push_back({id, score});
    sort_ranking(fused);
    return fused;
}

} // namespace clh
