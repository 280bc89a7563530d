#pragma once

#include <istream>
#include <memory>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "clh/bm25.hpp"
#include "clh/embedder.hpp"
#include "clh/error.hpp"
#include "clh/hnsw.hpp"
#include "clh/jsonl.hpp"
#include "clh/rrf.hpp"
#include "clh/taxonomy.hpp"

namespace clh {

enum class RetrievalMode { Hybrid, Bm25Only, DenseOnly };

inline const char* retrieval_mode_name(RetrievalMode mode) {
    switch (mode) {
        case RetrievalMode::Hybrid: return "hybrid";
        case RetrievalMode::Bm25Only: return "bm25";
        case RetrievalMode::DenseOnly: return "dense";
    }
    return "?";
}

inline RetrievalMode parse_retrieval_mode(const std::string& name) {
    if (name == "hybrid") return RetrievalMode::Hybrid;
    if (name == "bm25") return RetrievalMode::Bm25Only;
    if (name == "dense") return RetrievalMode::DenseOnly;
    throw Error(ErrorCode::InvalidConfig, "unknown retrieval mode '" + name + "'");
}

struct RetrieverConfig {
    Bm25Params bm25;
    DenseParams dense;
    RrfParams rrf;
    std::size_t ef_search = 128;
    RetrievalMode mode = RetrievalMode::Hybrid;
};

/// One hit of a term query; id is the index-entry position.
struct RetrievedTerm {
    std::uint32_t id = 0;
    double score = 0.0;
    std::string display;
    CodeId code;
};

/// Sparse-plus-dense retrieval over the alphabetical index. Both channels
/// rank the flattened term text; hybrid mode fuses them by reciprocal rank.
class TermRetriever {
public:
    static TermRetriever build(std::vector<IndexEntry> entries, const Embedder& embedder,
                               RetrieverConfig config = {}) {
        if (entries.empty()) throw Error(ErrorCode::EmptyIndex, "term index is empty");
        TermRetriever retriever;
        retriever.config_ = config;
        retriever.entries_ = std::move(entries);
        std::vector<std::string> texts;
        texts.reserve(retriever.entries_.size());
        for (const auto& entry : retriever.entries_) texts.push_back(entry.display);
        retriever.bm25_ = Bm25Index::build(texts, config.bm25);
        retriever.dense_ = DenseIndex::build(embedder.embed_all(texts), config.dense);
        retriever.query_embedder_ = &embedder;
        return retriever;
    }

    std::size_t size() const { return entries_.size(); }
    const IndexEntry& entry(std::uint32_t id) const { return entries_[id]; }
    const std::vector<IndexEntry>& entries() const { return entries_; }
    const RetrieverConfig& config() const { return config_; }
    const DenseIndex& dense() const { return dense_; }

    std::vector<RetrievedTerm> retrieve(const std::string& query, std::size_t k) const {
        return retrieve(query, k, config_.mode);
    }

    std::vector<RetrievedTerm> retrieve(const std::string& query, std::size_t k, RetrievalMode mode) const {
        std::vector<ScoredHit> hits;
        switch (mode) {
            case RetrievalMode::Bm25Only:
                hits = bm25_.top_k(query, k);
                break;
            case RetrievalMode::DenseOnly:
                hits = dense_.query(query_embedder_->embed(query), k, config_.ef_search);
                break;
            case RetrievalMode::Hybrid: {
                std::size_t depth = config_.rrf.fuse_depth;
                auto sparse = bm25_.top_k(query, depth);
                auto dense = dense_.query(query_embedder_->embed(query), depth, config_.ef_search);
                hits = rrf_fuse({sparse, dense}, config_.rrf);
                truncate_ranking(hits, k);
                break;
            }
        }
        std::vector<RetrievedTerm> out;
        out.reserve(hits.size());
        for (const auto& hit : hits) {
            out.push_back({hit.id, hit.score, entries_[hit.id].display, entries_[hit.id].code});
        }
        return out;
    }

    /// Snapshot of the entries and knobs; loading rebuilds both channels,
    /// which is deterministic, so a reloaded index ranks identically.
    void save(std::ostream& out) const {
        ojson doc = ojson::object();
        doc["schema"] = "clh.term_index/1";
        ojson cfg = ojson::object();
        cfg["bm25_k1"] = config_.bm25.k1;
        cfg["bm25_b"] = config_.bm25.b;
        cfg["hnsw_m"] = config_.dense.m;
        cfg["hnsw_ef_construct"] = config_.dense.ef_construct;
        cfg["hnsw_seed"] = config_.dense.seed;
        cfg["rrf_k"] = config_.rrf.k;
        cfg["fuse_depth"] = config_.rrf.fuse_depth;
        cfg["ef_search"] = config_.ef_search;
        cfg["mode"] = retrieval_mode_name(config_.mode);
        doc["config"] = cfg;
        ojson list = ojson::array();
        for (const auto& entry : entries_) {
            ojson item = ojson::object();
            item["term_path"] = entry.term_path;
            item["code"] = entry.code.text;
            list.push_back(std::move(item));
        }
        doc["entries"] = std::move(list);
        out << doc.dump(2) << '\n';
    }

    static TermRetriever load(std::istream& in, const Embedder& embedder) {
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& err) {
            throw Error(ErrorCode::ParseError, std::string("term index snapshot: ") + err.what());
        }
        if (doc.value("schema", "") != "clh.term_index/1") {
            throw Error(ErrorCode::ParseError, "term index snapshot: unknown schema");
        }
        const auto& cfg = doc.at("config");
        RetrieverConfig config;
        config.bm25.k1 = cfg.value("bm25_k1", config.bm25.k1);
        config.bm25.b = cfg.value("bm25_b", config.bm25.b);
        config.dense.m = cfg.value("hnsw_m", config.dense.m);
        config.dense.ef_construct = cfg.value("hnsw_ef_construct", config.dense.ef_construct);
        config.dense.seed = cfg.value("hnsw_seed", config.dense.seed);
        config.rrf.k = cfg.value("rrf_k", config.rrf.k);
        config.rrf.fuse_depth = cfg.value("fuse_depth", config.rrf.fuse_depth);
        config.ef_search = cfg.value("ef_search", config.ef_search);
        config.mode = parse_retrieval_mode(cfg.value("mode", "hybrid"));

        std::vector<IndexEntry> entries;
        for (const auto& item : doc.at("entries")) {
            IndexEntry entry;
            for (const auto& part : item.at("term_path")) entry.term_path.push_back(part.get<std::string>());
            for (std::size_t i = 0; i < entry.term_path.size(); ++i) {
                if (i) entry.display += ", ";
                entry.display += entry.term_path[i];
            }
            entry.code = parse_code_id(item.at("code").get<std::string>());
            entries.push_back(std::move(entry));
        }
        return build(std::move(entries), embedder, config);
    }

private:
    RetrieverConfig config_;
    std::vector<IndexEntry> entries_;
    Bm25Index bm25_;
    DenseIndex dense_;
    const Embedder* query_embedder_ = nullptr;
};

/// One unit of recall evaluation: the snippets asked of the retriever and
/// the codes the note was actually assigned.
struct RecallQuery {
    std::vector<std::string> queries;
    std::vector<std::string> gold_codes;
};

/// Pooled recall: of all gold codes across notes, the fraction reachable in
/// the union of each note's top-k term hits.
inline double recall_at_k(const TermRetriever& retriever, const std::vector<RecallQuery>& notes,
                          std::size_t k, RetrievalMode mode) {
    std::size_t covered = 0;
    std::size_t total = 0;
    for (const auto& note : notes) {
        if (note.gold_codes.empty()) throw Error(ErrorCode::EmptyGold, "note has no gold codes");
        std::set<std::string> reached;
        for (const auto& query : note.queries) {
            for (const auto& term : retriever.retrieve(query, k, mode)) reached.insert(term.code.text);
        }
        for (const auto& gold : note.gold_codes) {
            ++total;
            if (reached.count(gold)) ++covered;
        }
    }
    return total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
}

} // namespace clh
