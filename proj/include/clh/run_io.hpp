#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "clh/error.hpp"
#include "clh/jsonl.hpp"
#include "clh/pipeline.hpp"

namespace clh {

inline constexpr const char* kRunSchema = "clh.run/1";

namespace detail {

inline ojson term_to_json(const RetrievedTerm& term) {
    ojson out = ojson::object();
    out["id"] = term.id;
    out["term"] = term.display;
    out["code"] = term.code.text;
    out["score"] = term.score;
    return out;
}

inline RetrievedTerm term_from_json(const json& value) {
    RetrievedTerm term;
    term.id = value.at("id").get<std::uint32_t>();
    term.display = value.at("term").get<std::string>();
    term.code = parse_code_id(value.at("code").get<std::string>());
    term.score = value.at("score").get<double>();
    return term;
}

} // namespace detail

/// Timings are volatile by nature, so they stay out of the serialized form
/// unless explicitly requested; everything else round-trips.
inline ojson run_to_json(const CodingRun& run, bool include_timings = false) {
    ojson out = ojson::object();
    out["schema"] = kRunSchema;
    out["note_id"] = run.note_id;
    out["snippets"] = run.snippets;
    ojson located = ojson::array();
    for (const auto& trace : run.located) {
        ojson item = ojson::object();
        item["snippet"] = trace.snippet;
        ojson retrieved = ojson::array();
        for (const auto& term : trace.retrieved) retrieved.push_back(detail::term_to_json(term));
        item["retrieved"] = std::move(retrieved);
        ojson selected = ojson::array();
        for (const auto& term : trace.selected) selected.push_back(detail::term_to_json(term));
        item["selected"] = std::move(selected);
        located.push_back(std::move(item));
    }
    out["located"] = std::move(located);
    ojson groups = ojson::object();
    for (const auto& [chapter, codes] : run.chapter_groups) groups[chapter] = codes;
    out["chapter_groups"] = std::move(groups);
    out["tentative"] = run.tentative;
    out["final"] = run.final_codes;
    out["stage_errors"] = run.stage_errors;
    out["warnings"] = run.warnings;
    ojson calls_by_stage = ojson::object();
    for (const auto& [stage, count] : run.backend_calls) calls_by_stage[stage] = count;
    out["backend_calls"] = std::move(calls_by_stage);
    ojson calls = ojson::array();
    for (const auto& call : run.calls) {
        ojson item = ojson::object();
        item["stage"] = stage_name(call.stage);
        item["prompt"] = call.prompt;
        item["response"] = call.response;
        if (!call.error.empty()) item["error"] = call.error;
        calls.push_back(std::move(item));
    }
    out["calls"] = std::move(calls);
    if (include_timings) {
        ojson timings = ojson::object();
        for (const auto& [stage, ms] : run.timings_ms) timings[stage] = ms;
        out["timings_ms"] = std::move(timings);
    }
    return out;
}

inline CodingRun run_from_json(const json& value) {
    if (value.value("schema", "") != kRunSchema) {
        throw Error(ErrorCode::ParseError, "run record has unknown schema");
    }
    CodingRun run;
    run.note_id = value.at("note_id").get<std::string>();
    for (const auto& s : value.at("snippets")) run.snippets.push_back(s.get<std::string>());
    for (const auto& item : value.at("located")) {
        SnippetTrace trace;
        trace.snippet = item.at("snippet").get<std::string>();
        for (const auto& term : item.at("retrieved")) trace.retrieved.push_back(detail::term_from_json(term));
        for (const auto& term : item.at("selected")) trace.selected.push_back(detail::term_from_json(term));
        run.located.push_back(std::move(trace));
    }
    for (const auto& [chapter, codes] : value.at("chapter_groups").items()) {
        for (const auto& code : codes) run.chapter_groups[chapter].push_back(code.get<std::string>());
    }
    for (const auto& c : value.at("tentative")) run.tentative.push_back(c.get<std::string>());
    for (const auto& c : value.at("final")) run.final_codes.push_back(c.get<std::string>());
    for (const auto& e : value.at("stage_errors")) run.stage_errors.push_back(e.get<std::string>());
    for (const auto& w : value.at("warnings")) run.warnings.push_back(w.get<std::string>());
    for (const auto& [stage, count] : value.at("backend_calls").items()) {
        run.backend_calls[stage] = count.get<std::uint64_t>();
    }
    for (const auto& item : value.at("calls")) {
        StageCall call;
        call.stage = parse_stage(item.at("stage").get<std::string>());
        call.prompt = item.at("prompt").get<std::string>();
        call.response = item.at("response").get<std::string>();
        call.error = item.value("error", "");
        run.calls.push_back(std::move(call));
    }
    return run;
}

/// A non-empty manifest_hash is stamped onto every record so artifacts can be
/// traced back to the exact configuration that produced them.
inline void write_runs(std::ostream& out, const std::vector<CodingRun>& runs,
                       bool include_timings = false, const std::string& manifest_hash = "") {
    JsonlWriter writer(out);
    for (const auto& run : runs) {
        ojson record = run_to_json(run, include_timings);
        if (!manifest_hash.empty()) record["manifest_hash"] = manifest_hash;
        writer.write(record);
    }
}

inline std::vector<CodingRun> read_runs(std::istream& in, const std::string& source = "runs.jsonl") {
    std::vector<CodingRun> runs;
    JsonlReader reader(in, source);
    reader.for_each([&](std::size_t, const json& value) { runs.push_back(run_from_json(value)); });
    return runs;
}

} // namespace clh
