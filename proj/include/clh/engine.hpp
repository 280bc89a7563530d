#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "clh/backend.hpp"
#include "clh/config.hpp"
#include "clh/embedder.hpp"
#include "clh/http_backend.hpp"
#include "clh/note.hpp"
#include "clh/pipeline.hpp"
#include "clh/prompts.hpp"
#include "clh/retriever.hpp"
#include "clh/taxonomy.hpp"

namespace clh {

namespace detail {

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    return in;
}

} // namespace detail

/// Everything load_assets materializes from a config. Pointer members keep
/// the embedder address stable; the retriever holds a reference to it.
struct EngineAssets {
    Taxonomy taxonomy;
    GuidelineSet guidelines;
    std::vector<ClinicalNote> notes;
    PromptLibrary prompts = PromptLibrary::builtin();
    std::unique_ptr<Embedder> embedder;
    std::unique_ptr<TermRetriever> retriever;

    EngineContext context(Backend& backend) const {
        return EngineContext{taxonomy, *retriever, guidelines, prompts, backend};
    }
};

/// Loads the taxonomy triple and notes and builds the retrieval index.
/// Guidelines and notes are optional inputs; commands that need them check.
inline EngineAssets load_assets(const EngineConfig& config) {
    EngineAssets assets;
    if (config.data.tabular.empty()) {
        throw Error(ErrorCode::InvalidConfig, "data.tabular path is required");
    }
    {
        auto in = detail::open_input(config.data.tabular);
        assets.taxonomy = Taxonomy::load_tabular(in, config.data.tabular);
    }
    if (config.data.alpha_index.empty()) {
        throw Error(ErrorCode::InvalidConfig, "data.alpha_index path is required");
    }
    std::vector<IndexEntry> entries;
    {
        auto in = detail::open_input(config.data.alpha_index);
        entries = load_alpha_index(in, config.data.alpha_index);
    }
    if (!config.data.guidelines.empty() && std::filesystem::exists(config.data.guidelines)) {
        auto in = detail::open_input(config.data.guidelines);
        assets.guidelines = GuidelineSet::load(in, config.data.guidelines);
    }
    if (!config.data.notes.empty()) {
        auto in = detail::open_input(config.data.notes);
        assets.notes = load_notes(in, config.data.notes);
    }
    if (!config.data.prompts_dir.empty()) {
        assets.prompts = PromptLibrary::from_directory(config.data.prompts_dir);
    }
    assets.embedder =
        std::make_unique<HashEmbedder>(config.retrieval.embedder_dim, config.retrieval.embedder_seed);
    assets.retriever = std::make_unique<TermRetriever>(
        TermRetriever::build(std::move(entries), *assets.embedder, config.retriever_config()));
    return assets;
}

inline std::unique_ptr<Backend> make_backend(const EngineConfig& config,
                                             const std::vector<ClinicalNote>& notes) {
    if (config.backend.kind == "scripted") {
        if (config.backend.scripted_path.empty()) {
            throw Error(ErrorCode::InvalidConfig, "backend.scripted_path is required for scripted backend");
        }
        auto in = detail::open_input(config.backend.scripted_path);
        return std::make_unique<ScriptedBackend>(
            ScriptedBackend::load(in, config.backend.scripted_path));
    }
    if (config.backend.kind == "oracle") {
        return std::make_unique<OracleBackend>(notes);
    }
    if (config.backend.kind == "http") {
        return std::make_unique<HttpBackend>(config.http_config());
    }
    throw Error(ErrorCode::InvalidConfig, "unknown backend kind '" + config.backend.kind + "'");
}

} // namespace clh
