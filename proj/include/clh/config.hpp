#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clh/error.hpp"
#include "clh/http_backend.hpp"
#include "clh/jsonl.hpp"
#include "clh/pipeline.hpp"
#include "clh/retriever.hpp"

namespace clh {

/// Layered engine configuration. Defaults live here; a JSON config file
/// overrides them; command-line flags override the file. Environment
/// variables are reserved for credentials. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
struct EngineConfig {
    struct Data {
        std::string tabular;
        std::string alpha_index;
        std::string guidelines;
        std::string notes;
        std::string prompts_dir; // empty = built-in templates
    } data;

    struct Retrieval {
        std::size_t k = 10; // terms handed to the navigator per snippet
        std::string mode = "hybrid";
        std::size_t ef_search = 128;
        double k_rrf = 60.0;
        std::size_t fuse_depth = 100;
        double bm25_k1 = 1.2;
        double bm25_b = 0.75;
        std::size_t hnsw_m = 32;
        std::size_t hnsw_ef_construct = 256;
        std::uint64_t hnsw_seed = 42;
        std::size_t embedder_dim = 64;
        std::uint64_t embedder_seed = 0x9e3779b97f4a7c15ULL;
    } retrieval;

    struct BackendConf {
        std::string kind = "scripted"; // scripted | oracle | http
        std::string scripted_path;
        std::string base_url = "http://127.0.0.1:8000";
        std::string path = "/v1/chat/completions";
        std::string model = "default";
        int timeout_ms = 30000;
        int max_retries = 3;
        int backoff_ms = 250;
        std::size_t max_in_flight = 4;
        std::string api_key_env = "CLH_API_KEY";
    } backend;

    struct PipelineConf {
        std::size_t pass_count = 1;
        long long stage_timeout_ms = 0;
        std::size_t max_in_flight = 4;
        std::size_t notes_in_flight = 1;
        std::string decoding = "thinking";
        std::string context = "ids+descriptions+guidelines";
        bool use_gold_evidence = false;
    } pipeline;

    struct Experiment {
        std::vector<std::size_t> k_values{0, 1, 5};
        std::vector<std::string> contexts{"ids_only", "ids+descriptions", "ids+descriptions+guidelines"};
    } experiment;

    RetrieverConfig retriever_config() const {
        RetrieverConfig config;
        config.bm25.k1 = retrieval.bm25_k1;
        config.bm25.b = retrieval.bm25_b;
        config.dense.m = retrieval.hnsw_m;
        config.dense.ef_construct = retrieval.hnsw_ef_construct;
        config.dense.seed = retrieval.hnsw_seed;
        config.rrf.k = retrieval.k_rrf;
        config.rrf.fuse_depth = retrieval.fuse_depth;
        config.ef_search = retrieval.ef_search;
        config.mode = parse_retrieval_mode(retrieval.mode);
        return config;
    }

    PipelineConfig pipeline_config() const {
        PipelineConfig config;
        config.top_k_terms = retrieval.k;
        config.mode = parse_decoding_mode(pipeline.decoding);
        config.context = parse_context_level(pipeline.context);
        config.max_in_flight = pipeline.max_in_flight;
        config.pass_count = pipeline.pass_count;
        config.stage_timeout_ms = pipeline.stage_timeout_ms;
        config.use_gold_evidence = pipeline.use_gold_evidence;
        return config;
    }

    HttpBackendConfig http_config() const {
        HttpBackendConfig config;
        config.base_url = backend.base_url;
        config.path = backend.path;
        config.model = backend.model;
        config.timeout_ms = backend.timeout_ms;
        config.max_retries = backend.max_retries;
        config.backoff_ms = backend.backoff_ms;
        config.max_in_flight = backend.max_in_flight;
        config.api_key_env = backend.api_key_env;
        return config;
    }

    /// Canonical snapshot; key order is fixed so its hash is stable.
    ojson to_json() const {
        ojson out = ojson::object();
        ojson d = ojson::object();
        d["tabular"] = data.tabular;
        d["alpha_index"] = data.alpha_index;
        d["guidelines"] = data.guidelines;
        d["notes"] = data.notes;
        d["prompts_dir"] = data.prompts_dir;
        out["data"] = std::move(d);
        ojson r = ojson::object();
        r["k"] = retrieval.k;
        r["mode"] = retrieval.mode;
        r["ef_search"] = retrieval.ef_search;
        r["k_rrf"] = retrieval.k_rrf;
        r["fuse_depth"] = retrieval.fuse_depth;
        r["bm25_k1"] = retrieval.bm25_k1;
        r["bm25_b"] = retrieval.bm25_b;
        r["hnsw_m"] = retrieval.hnsw_m;
        r["hnsw_ef_construct"] = retrieval.hnsw_ef_construct;
        r["hnsw_seed"] = retrieval.hnsw_seed;
        r["embedder_dim"] = retrieval.embedder_dim;
        r["embedder_seed"] = retrieval.embedder_seed;
        out["retrieval"] = std::move(r);
        ojson b = ojson::object();
        b["kind"] = backend.kind;
        b["scripted_path"] = backend.scripted_path;
        b["base_url"] = backend.base_url;
        b["path"] = backend.path;
        b["model"] = backend.model;
        b["timeout_ms"] = backend.timeout_ms;
        b["max_retries"] = backend.max_retries;
        b["backoff_ms"] = backend.backoff_ms;
        b["max_in_flight"] = backend.max_in_flight;
        b["api_key_env"] = backend.api_key_env;
        out["backend"] = std::move(b);
        ojson p = ojson::object();
        p["pass_count"] = pipeline.pass_count;
        p["stage_timeout_ms"] = pipeline.stage_timeout_ms;
        p["max_in_flight"] = pipeline.max_in_flight;
        p["notes_in_flight"] = pipeline.notes_in_flight;
        p["decoding"] = pipeline.decoding;
        p["context"] = pipeline.context;
        p["use_gold_evidence"] = pipeline.use_gold_evidence;
        out["pipeline"] = std::move(p);
        ojson e = ojson::object();
        e["k_values"] = experiment.k_values;
        e["contexts"] = experiment.contexts;
        out["experiment"] = std::move(e);
        return out;
    }
};

namespace detail {

inline void reject_unknown_keys(const json& value, const std::vector<std::string>& known,
                                const std::string& scope) {
    for (const auto& [key, _] : value.items()) {
        bool ok = false;
        for (const auto& k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + scope + key + "'");
    }
}

} // namespace detail

/// Applies a JSON object on top of the given config. Section and key names
/// must match exactly; anything else is InvalidConfig.
inline EngineConfig apply_config_json(EngineConfig config, const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "config root must be an object");
    detail::reject_unknown_keys(doc, {"data", "retrieval", "backend", "pipeline", "experiment"}, "");

    if (doc.contains("data")) {
        const auto& d = doc.at("data");
        detail::reject_unknown_keys(d, {"tabular", "alpha_index", "guidelines", "notes", "prompts_dir"},
                                    "data.");
        config.data.tabular = d.value("tabular", config.data.tabular);
        config.data.alpha_index = d.value("alpha_index", config.data.alpha_index);
        config.data.guidelines = d.value("guidelines", config.data.guidelines);
        config.data.notes = d.value("notes", config.data.notes);
        config.data.prompts_dir = d.value("prompts_dir", config.data.prompts_dir);
    }
    if (doc.contains("retrieval")) {
        const auto& r = doc.at("retrieval");
        detail::reject_unknown_keys(r,
                                    {"k", "mode", "ef_search", "k_rrf", "fuse_depth", "bm25_k1", "bm25_b",
                                     "hnsw_m", "hnsw_ef_construct", "hnsw_seed", "embedder_dim",
                                     "embedder_seed"},
                                    "retrieval.");
        config.retrieval.k = r.value("k", config.retrieval.k);
        config.retrieval.mode = r.value("mode", config.retrieval.mode);
        config.retrieval.ef_search = r.value("ef_search", config.retrieval.ef_search);
        config.retrieval.k_rrf = r.value("k_rrf", config.retrieval.k_rrf);
        config.retrieval.fuse_depth = r.value("fuse_depth", config.retrieval.fuse_depth);
        config.retrieval.bm25_k1 = r.value("bm25_k1", config.retrieval.bm25_k1);
        config.retrieval.bm25_b = r.value("bm25_b", config.retrieval.bm25_b);
        config.retrieval.hnsw_m = r.value("hnsw_m", config.retrieval.hnsw_m);
        config.retrieval.hnsw_ef_construct = r.value("hnsw_ef_construct", config.retrieval.hnsw_ef_construct);
        config.retrieval.hnsw_seed = r.value("hnsw_seed", config.retrieval.hnsw_seed);
        config.retrieval.embedder_dim = r.value("embedder_dim", config.retrieval.embedder_dim);
        config.retrieval.embedder_seed = r.value("embedder_seed", config.retrieval.embedder_seed);
    }
    if (doc.contains("backend")) {
        const auto& b = doc.at("backend");
        detail::reject_unknown_keys(b,
                                    {"kind", "scripted_path", "base_url", "path", "model", "timeout_ms",
                                     "max_retries", "backoff_ms", "max_in_flight", "api_key_env"},
                                    "backend.");
        config.backend.kind = b.value("kind", config.backend.kind);
        config.backend.scripted_path = b.value("scripted_path", config.backend.scripted_path);
        config.backend.base_url = b.value("base_url", config.backend.base_url);
        config.backend.path = b.value("path", config.backend.path);
        config.backend.model = b.value("model", config.backend.model);
        config.backend.timeout_ms = b.value("timeout_ms", config.backend.timeout_ms);
        config.backend.max_retries = b.value("max_retries", config.backend.max_retries);
        config.backend.backoff_ms = b.value("backoff_ms", config.backend.backoff_ms);
        config.backend.max_in_flight = b.value("max_in_flight", config.backend.max_in_flight);
        config.backend.api_key_env = b.value("api_key_env", config.backend.api_key_env);
    }
    if (doc.contains("pipeline")) {
        const auto& p = doc.at("pipeline");
        detail::reject_unknown_keys(p,
                                    {"pass_count", "stage_timeout_ms", "max_in_flight", "notes_in_flight",
                                     "decoding", "context", "use_gold_evidence"},
                                    "pipeline.");
        config.pipeline.pass_count = p.value("pass_count", config.pipeline.pass_count);
        config.pipeline.stage_timeout_ms = p.value("stage_timeout_ms", config.pipeline.stage_timeout_ms);
        config.pipeline.max_in_flight = p.value("max_in_flight", config.pipeline.max_in_flight);
        config.pipeline.notes_in_flight = p.value("notes_in_flight", config.pipeline.notes_in_flight);
        config.pipeline.decoding = p.value("decoding", config.pipeline.decoding);
        config.pipeline.context = p.value("context", config.pipeline.context);
        config.pipeline.use_gold_evidence = p.value("use_gold_evidence", config.pipeline.use_gold_evidence);
    }
    if (doc.contains("experiment")) {
        const auto& e = doc.at("experiment");
        detail::reject_unknown_keys(e, {"k_values", "contexts"}, "experiment.");
        if (e.contains("k_values")) {
            config.experiment.k_values.clear();
            for (const auto& k : e.at("k_values")) config.experiment.k_values.push_back(k.get<std::size_t>());
        }
        if (e.contains("contexts")) {
            config.experiment.contexts.clear();
            for (const auto& c : e.at("contexts")) config.experiment.contexts.push_back(c.get<std::string>());
        }
    }

    // surface bad enum spellings at load time, not first use
    parse_retrieval_mode(config.retrieval.mode);
    parse_decoding_mode(config.pipeline.decoding);
    parse_context_level(config.pipeline.context);
    for (const auto& c : config.experiment.contexts) parse_context_level(c);
    if (config.backend.kind != "scripted" && config.backend.kind != "oracle" &&
        config.backend.kind != "http") {
        throw Error(ErrorCode::InvalidConfig, "unknown backend kind '" + config.backend.kind + "'");
    }
    if (config.retrieval.embedder_dim == 0) {
        throw Error(ErrorCode::InvalidConfig, "embedder_dim must be positive");
    }
    return config;
}

inline EngineConfig load_config_file(const std::filesystem::path& path, EngineConfig base = {}) {
    std::string content = read_file(path.string());
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::parse_error& err) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + err.what());
    }
    return apply_config_json(std::move(base), doc);
}

} // namespace clh
