#pragma once

#include <atomic>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "clh/error.hpp"
#include "clh/hash.hpp"
#include "clh/jsonl.hpp"
#include "clh/note.hpp"
#include "clh/prompts.hpp"

namespace clh {

/// One stage call. candidate_codes carries the code behind each prompt id,
/// 1-based, so id-aware backends can ground their replies; it is empty for
/// the evidence stage.
struct BackendRequest {
    Stage stage = Stage::Evidence;
    DecodingMode mode = DecodingMode::Thinking;
    std::string prompt;
    std::string note_id;
    std::vector<std::string> candidate_codes;
};

struct BackendResponse {
    std::string text;
};

/// A text-completion source. Implementations must tolerate concurrent
/// complete() calls.
class Backend {
public:
    Backend() = default;
    Backend(const Backend&) noexcept {}            // counters are per-instance
    Backend& operator=(const Backend&) noexcept { return *this; }
    virtual ~Backend() = default;
    virtual BackendResponse complete(const BackendRequest& request) = 0;
    virtual std::string name() const = 0;

    std::uint64_t calls() const { return calls_.load(); }

protected:
    void count_call() { calls_.fetch_add(1); }

private:
    std::atomic<std::uint64_t> calls_{0};
};

inline std::string scripted_prompt_key(const std::string& prompt) { return to_hex(fnv1a64(prompt)); }

/// Replays canned replies: exact matches are keyed by (stage, prompt hash),
/// with an optional per-stage fallback. Fully deterministic, no I/O.
class ScriptedBackend final : public Backend {
public:
    ScriptedBackend() = default;

    /// Accepts {"schema":"clh.scripted/1", "answers":[{stage, prompt_hash,
    /// reply}...], "defaults":{stage: reply}}.
    static ScriptedBackend load(std::istream& in, const std::string& source = "scripted.json") {
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& err) {
            throw Error(ErrorCode::ParseError, source + ": " + err.what());
        }
        if (doc.value("schema", "") != "clh.scripted/1") {
            throw Error(ErrorCode::ParseError, source + ": unknown schema");
        }
        ScriptedBackend backend;
        if (doc.contains("answers")) {
            for (const auto& item : doc.at("answers")) {
                Stage stage = parse_stage(item.at("stage").get<std::string>());
                backend.exact_[{stage, item.at("prompt_hash").get<std::string>()}] =
                    item.at("reply").get<std::string>();
            }
        }
        if (doc.contains("defaults")) {
            for (const auto& [key, value] : doc.at("defaults").items()) {
                backend.defaults_[parse_stage(key)] = value.get<std::string>();
            }
        }
        return backend;
    }

    void add_reply(Stage stage, const std::string& prompt, const std::string& reply) {
        exact_[{stage, scripted_prompt_key(prompt)}] = reply;
    }

    void add_default(Stage stage, const std::string& reply) { defaults_[stage] = reply; }

    /// Inverse of load(). Entries come out sorted by (stage, prompt hash),
    /// so the same table always serializes identically.
    ojson to_json() const {
        ojson doc = ojson::object();
        doc["schema"] = "clh.scripted/1";
        ojson answers = ojson::array();
        for (const auto& [key, reply] : exact_) {
            ojson item = ojson::object();
            item["stage"] = stage_name(key.first);
            item["prompt_hash"] = key.second;
            item["reply"] = reply;
            answers.push_back(std::move(item));
        }
        doc["answers"] = std::move(answers);
        if (!defaults_.empty()) {
            ojson defaults = ojson::object();
            for (const auto& [stage, reply] : defaults_) defaults[stage_name(stage)] = reply;
            doc["defaults"] = std::move(defaults);
        }
        return doc;
    }

    BackendResponse complete(const BackendRequest& request) override {
        count_call();
        auto it = exact_.find({request.stage, scripted_prompt_key(request.prompt)});
        if (it != exact_.end()) return {it->second};
        auto fallback = defaults_.find(request.stage);
        if (fallback != defaults_.end()) return {fallback->second};
        throw Error(ErrorCode::BackendUnavailable,
                    std::string("no scripted reply for ") + stage_name(request.stage) + " prompt " +
                        scripted_prompt_key(request.prompt));
    }

    std::string name() const override { return "scripted"; }

private:
    std::map<std::pair<Stage, std::string>, std::string> exact_;
    std::map<Stage, std::string> defaults_;
};

/// Answers every request from the notes' own annotations: it selects
/// exactly the candidates that are gold codes and quotes gold evidence
/// spans. The resulting run shows what the scaffolding itself can reach
/// when the model is never wrong.
class OracleBackend final : public Backend {
public:
    explicit OracleBackend(const std::vector<ClinicalNote>& notes) {
        for (const auto& note : notes) {
            gold_[note.id] = {note.gold_codes.begin(), note.gold_codes.end()};
            auto& spans = evidence_[note.id];
            for (const auto& span : note.gold_evidence) spans.push_back(span.text);
        }
    }

    BackendResponse complete(const BackendRequest& request) override {
        count_call();
        auto gold_it = gold_.find(request.note_id);
        if (gold_it == gold_.end()) {
            throw Error(ErrorCode::BackendUnavailable, "oracle knows no note '" + request.note_id + "'");
        }
        const auto& gold = gold_it->second;
        std::string payload;
        switch (request.stage) {
            case Stage::Evidence: {
                const auto& spans = evidence_.at(request.note_id);
                for (std::size_t i = 0; i < spans.size(); ++i) {
                    if (i) payload += ", ";
                    payload += '"' + spans[i] + '"';
                }
                break;
            }
            case Stage::Navigator:
            case Stage::Reconciler: {
                for (std::size_t i = 0; i < request.candidate_codes.size(); ++i) {
                    if (gold.count(request.candidate_codes[i])) {
                        if (!payload.empty()) payload += ", ";
                        payload += std::to_string(i + 1);
                    }
                }
                if (payload.empty()) payload = "0";
                break;
            }
            case Stage::Validator: {
                payload = "0";
                for (std::size_t i = 0; i < request.candidate_codes.size(); ++i) {
                    if (gold.count(request.candidate_codes[i])) {
                        payload = std::to_string(i + 1);
                        break;
                    }
                }
                break;
            }
        }
        if (request.mode == DecodingMode::Constrained) return {payload};
        return {"<think>annotation lookup</think>\n<answer>" + payload + "</answer>"};
    }

    std::string name() const override { return "oracle"; }

private:
    std::unordered_map<std::string, std::unordered_set<std::string>> gold_;
    std::unordered_map<std::string, std::vector<std::string>> evidence_;
};

} // namespace clh
