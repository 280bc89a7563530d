#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <string>

#include "clh/config.hpp"
#include "clh/hash.hpp"
#include "clh/jsonl.hpp"
#include "clh/version.hpp"

namespace clh {

/// Provenance stamp written next to every artifact. The hash covers the
/// engine version, the config snapshot, and the input digests; the
/// timestamp is informational and deliberately outside the hash so that
/// identical inputs always produce an identical hash.
struct RunManifest {
    std::string engine_version = kEngineVersion;
    std::string config_hash;
    std::map<std::string, std::string> input_digests; // path -> content hash
    std::string created_at; // ISO-8601 UTC

    std::string hash() const {
        std::string material = engine_version + '\n' + config_hash + '\n';
        for (const auto& [path, digest] : input_digests) {
            material += path + '=' + digest + '\n';
        }
        return content_hash(material);
    }

    ojson to_json() const {
        ojson out = ojson::object();
        out["schema"] = "clh.manifest/1";
        out["engine_version"] = engine_version;
        out["config_hash"] = config_hash;
        ojson digests = ojson::object();
        for (const auto& [path, digest] : input_digests) digests[path] = digest;
        out["input_digests"] = std::move(digests);
        out["manifest_hash"] = hash();
        out["created_at"] = created_at;
        return out;
    }
};

inline std::string iso8601_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Builds the manifest for a config: hash the canonical config snapshot and
/// digest every input file that exists.
inline RunManifest make_manifest(const EngineConfig& config) {
    RunManifest manifest;
    manifest.config_hash = content_hash(config.to_json().dump());
    manifest.created_at = iso8601_now();
    for (const std::string& path : {config.data.tabular, config.data.alpha_index, config.data.guidelines,
                                    config.data.notes, config.backend.scripted_path}) {
        if (!path.empty() && std::filesystem::exists(path)) {
            manifest.input_digests[path] = content_hash(read_file(path));
        }
    }
    return manifest;
}

} // namespace clh
