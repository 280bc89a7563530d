#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "clh/error.hpp"
#include "clh/ranking.hpp"
#include "clh/tokenize.hpp"

namespace clh {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 over a fixed document list; document ids are positions in the
/// build-time corpus. Uses the smoothed idf ln(1 + (N - df + 0.5)/(df + 0.5)),
/// which never goes negative.
class Bm25Index {
public:
    static Bm25Index build(const std::vector<std::string>& docs, Bm25Params params = {}) {
        if (docs.empty()) throw Error(ErrorCode::EmptyIndex, "bm25 corpus is empty");
        Bm25Index index;
        index.params_ = params;
        index.doc_count_ = docs.size();
        index.doc_lengths_.reserve(docs.size());

        std::size_t total_length = 0;
        for (std::uint32_t doc_id = 0; doc_id < docs.size(); ++doc_id) {
            auto tokens = tokenize(docs[doc_id]);
            index.doc_lengths_.push_back(tokens.size());
            total_length += tokens.size();
            std::unordered_map<std::string, std::uint32_t> counts;
            for (const auto& token : tokens) ++counts[token];
            for (const auto& [term, tf] : counts) {
                index.postings_[term].push_back({doc_id, tf});
            }
        }
        index.avg_doc_length_ =
            index.doc_count_ ? static_cast<double>(total_length) / static_cast<double>(index.doc_count_) : 0.0;
        return index;
    }

    std::size_t size() const { return doc_count_; }

    /// Scores every document containing at least one query term, descending.
    std::vector<ScoredHit> top_k(const std::string& query, std::size_t k) const {
        auto terms = tokenize(query);
        std::unordered_map<std::uint32_t, double> scores;
        for (const auto& term : terms) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const auto& posting = it->second;
            double df = static_cast<double>(posting.size());
            double n = static_cast<double>(doc_count_);
            double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            for (const auto& [doc_id, tf] : posting) {
                double length_norm =
                    1.0 - params_.b + params_.b * static_cast<double>(doc_lengths_[doc_id]) / avg_doc_length_;
                double tf_component = (static_cast<double>(tf) * (params_.k1 + 1.0)) /
                                      (static_cast<double>(tf) + params_.k1 * length_norm);
                scores[doc_id] += idf * tf_component;
            }
        }
        std::vector<ScoredHit> hits;
        hits.reserve(scores.size());
        for (const auto& [doc_id, score] : scores) hits.push_back({doc_id, score});
        sort_ranking(hits);
        truncate_ranking(hits, k);
        return hits;
    }

private:
    struct Posting {
        std::uint32_t doc_id;
        std::uint32_t term_frequency;
    };

    Bm25Params params_;
    std::size_t doc_count_ = 0;
    double avg_doc_length_ = 0.0;
    std::vector<std::size_t> doc_lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

} // namespace clh
