#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <unordered_set>
#include <vector>

#include "clh/error.hpp"
#include "clh/ranking.hpp"

namespace clh {

struct DenseParams {
    std::size_t m = 32;            // max links per node above the ground layer
    std::size_t ef_construct = 256;
    std::uint64_t seed = 42;       // drives level assignment only
};

/// Approximate nearest-neighbour index over L2-normalized vectors with a
/// hierarchical small-world graph; similarity is the inner product. Queries
/// with ef_search at or above the corpus size bypass the graph and scan
/// exhaustively, so generous budgets are exact by construction.
class DenseIndex {
public:
    static DenseIndex build(const std::vector<std::vector<float>>& vectors, DenseParams params = {}) {
        if (vectors.empty()) throw Error(ErrorCode::EmptyIndex, "dense corpus is empty");
        DenseIndex index;
        index.params_ = params;
        index.dim_ = vectors.front().size();
        index.level_scale_ = 1.0 / std::log(static_cast<double>(params.m));
        index.rng_.seed(params.seed);
        index.data_.reserve(vectors.size() * index.dim_);
        for (const auto& vec : vectors) {
            if (vec.size() != index.dim_) {
                throw Error(ErrorCode::DimensionMismatch,
                            "vector has dim " + std::to_string(vec.size()) + ", index has " +
                                std::to_string(index.dim_));
            }
            index.append_normalized(vec);
        }
        for (std::uint32_t id = 0; id < vectors.size(); ++id) index.insert(id);
        return index;
    }

    std::size_t size() const { return links_.size(); }
    std::size_t dim() const { return dim_; }

    const float* vector(std::uint32_t id) const { return data_.data() + static_cast<std::size_t>(id) * dim_; }

    /// Top-k by descending similarity. Approximate for small ef_search,
    /// exact once ef_search covers the whole corpus.
    std::vector<ScoredHit> query(const std::vector<float>& q, std::size_t k, std::size_t ef_search = 128) const {
        check_dim(q);
        if (k == 0) return {};
        if (ef_search >= size()) return exact_top_k(q, k);

        std::vector<float> qn = normalized(q);
        std::uint32_t curr = entry_point_;
        double curr_sim = similarity(qn.data(), curr);
        for (int layer = max_level_; layer > 0; --layer) {
            greedy_step(qn.data(), layer, curr, curr_sim);
        }
        auto found = search_layer(qn.data(), curr, std::max(ef_search, k), 0);
        std::vector<ScoredHit> hits;
        hits.reserve(found.size());
        for (const auto& c : found) hits.push_back({c.id, c.sim});
        sort_ranking(hits);
        truncate_ranking(hits, k);
        return hits;
    }

    /// Brute-force scan; the ground truth the graph search approximates.
    std::vector<ScoredHit> exact_top_k(const std::vector<float>& q, std::size_t k) const {
        check_dim(q);
        std::vector<float> qn = normalized(q);
        std::vector<ScoredHit> hits;
        hits.reserve(size());
        for (std::uint32_t id = 0; id < size(); ++id) {
            hits.push_back({id, similarity(qn.data(), id)});
        }
        sort_ranking(hits);
        truncate_ranking(hits, k);
        return hits;
    }

private:
    struct Cand {
        double sim;
        std::uint32_t id;
    };

    static bool better(const Cand& a, const Cand& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.id < b.id;
    }

    struct BestOnTop {
        bool operator()(const Cand& a, const Cand& b) const { return better(b, a); }
    };
    struct WorstOnTop {
        bool operator()(const Cand& a, const Cand& b) const { return better(a, b); }
    };

    void check_dim(const std::vector<float>& q) const {
        if (q.size() != dim_) {
            throw Error(ErrorCode::DimensionMismatch,
                        "query has dim " + std::to_string(q.size()) + ", index has " + std::to_string(dim_));
        }
    }

    void append_normalized(const std::vector<float>& vec) {
        double norm2 = 0.0;
        for (float v : vec) norm2 += static_cast<double>(v) * static_cast<double>(v);
        double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        for (float v : vec) data_.push_back(static_cast<float>(v * inv));
    }

    std::vector<float> normalized(const std::vector<float>& vec) const {
        std::vector<float> out(vec);
        double norm2 = 0.0;
        for (float v : out) norm2 += static_cast<double>(v) * static_cast<double>(v);
        if (norm2 > 0.0) {
            float inv = static_cast<float>(1.0 / std::sqrt(norm2));
            for (float& v : out) v *= inv;
        }
        return out;
    }

    double similarity(const float* q, std::uint32_t id) const {
        const float* v = vector(id);
        double dot = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) dot += static_cast<double>(q[i]) * static_cast<double>(v[i]);
        return dot;
    }

    int sample_level() {
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        double u = uniform(rng_);
        if (u <= 0.0) u = std::numeric_limits<double>::min();
        return static_cast<int>(-std::log(u) * level_scale_);
    }

    std::size_t max_links(int layer) const { return layer == 0 ? params_.m * 2 : params_.m; }

    void greedy_step(const float* q, int layer, std::uint32_t& curr, double& curr_sim) const {
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::uint32_t neighbor : links_[curr][static_cast<std::size_t>(layer)]) {
                double sim = similarity(q, neighbor);
                if (sim > curr_sim || (sim == curr_sim && neighbor < curr)) {
                    curr = neighbor;
                    curr_sim = sim;
                    improved = true;
                }
            }
        }
    }

    std::vector<Cand> search_layer(const float* q, std::uint32_t entry, std::size_t ef, int layer) const {
        std::unordered_set<std::uint32_t> visited{entry};
        std::priority_queue<Cand, std::vector<Cand>, BestOnTop> candidates;
        std::priority_queue<Cand, std::vector<Cand>, WorstOnTop> results;
        Cand start{similarity(q, entry), entry};
        candidates.push(start);
        results.push(start);

        while (!candidates.empty()) {
            Cand c = candidates.top();
            candidates.pop();
            if (results.size() >= ef && better(results.top(), c)) break;
            for (std::uint32_t neighbor : links_[c.id][static_cast<std::size_t>(layer)]) {
                if (!visited.insert(neighbor).second) continue;
                Cand next{similarity(q, neighbor), neighbor};
                if (results.size() < ef || better(next, results.top())) {
                    candidates.push(next);
                    results.push(next);
                    if (results.size() > ef) results.pop();
                }
            }
        }
        std::vector<Cand> out;
        out.reserve(results.size());
        while (!results.empty()) {
            out.push_back(results.top());
            results.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

    void insert(std::uint32_t id) {
        int level = sample_level();
        links_.push_back(std::vector<std::vector<std::uint32_t>>(static_cast<std::size_t>(level) + 1));
        if (links_.size() == 1) {
            entry_point_ = id;
            max_level_ = level;
            return;
        }

        const float* q = vector(id);
        std::uint32_t curr = entry_point_;
        double curr_sim = similarity(q, curr);
        for (int layer = max_level_; layer > level; --layer) {
            greedy_step(q, layer, curr, curr_sim);
        }
        for (int layer = std::min(level, max_level_); layer >= 0; --layer) {
            auto found = search_layer(q, curr, params_.ef_construct, layer);
            std::size_t take = std::min(found.size(), max_links(layer));
            auto& own = links_[id][static_cast<std::size_t>(layer)];
            for (std::size_t i = 0; i < take; ++i) {
                std::uint32_t neighbor = found[i].id;
                own.push_back(neighbor);
                auto& theirs = links_[neighbor][static_cast<std::size_t>(layer)];
                theirs.push_back(id);
                if (theirs.size() > max_links(layer)) shrink(neighbor, layer);
            }
            if (!found.empty()) curr = found.front().id;
        }
        if (level > max_level_) {
            entry_point_ = id;
            max_level_ = level;
        }
    }

    void shrink(std::uint32_t node, int layer) {
        const float* base = vector(node);
        auto& list = links_[node][static_cast<std::size_t>(layer)];
        std::vector<Cand> scored;
        scored.reserve(list.size());
        for (std::uint32_t neighbor : list) scored.push_back({similarity(base, neighbor), neighbor});
        std::sort(scored.begin(), scored.end(), better);
        list.clear();
        for (std::size_t i = 0; i < max_links(layer) && i < scored.size(); ++i) list.push_back(scored[i].id);
    }

    DenseParams params_;
    std::size_t dim_ = 0;
    double level_scale_ = 1.0;
    std::vector<float> data_;
    std::vector<std::vector<std::vector<std::uint32_t>>> links_; // node -> layer -> neighbours
    std::uint32_t entry_point_ = 0;
    int max_level_ = 0;
    std::mt19937_64 rng_;
};

} // namespace clh
