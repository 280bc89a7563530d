#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clh/answer.hpp"
#include "clh/backend.hpp"
#include "clh/code_id.hpp"
#include "clh/error.hpp"
#include "clh/jsonl.hpp"
#include "clh/note.hpp"
#include "clh/parallel.hpp"
#include "clh/prompts.hpp"
#include "clh/retriever.hpp"
#include "clh/taxonomy.hpp"

namespace clh {

/// How much candidate context the code-selection prompts carry.
enum class ContextLevel { IdsOnly, IdsDescriptions, IdsDescriptionsGuidelines };

inline const char* context_level_name(ContextLevel level) {
    switch (level) {
        case ContextLevel::IdsOnly: return "ids_only";
        case ContextLevel::IdsDescriptions: return "ids+descriptions";
        case ContextLevel::IdsDescriptionsGuidelines: return "ids+descriptions+guidelines";
    }
    return "?";
}

inline ContextLevel parse_context_level(const std::string& name) {
    if (name == "ids_only") return ContextLevel::IdsOnly;
    if (name == "ids+descriptions") return ContextLevel::IdsDescriptions;
    if (name == "ids+descriptions+guidelines") return ContextLevel::IdsDescriptionsGuidelines;
    throw Error(ErrorCode::InvalidConfig, "unknown context level '" + name + "'");
}

struct PipelineConfig {
    std::size_t top_k_terms = 10;
    DecodingMode mode = DecodingMode::Thinking;
    ContextLevel context = ContextLevel::IdsDescriptionsGuidelines;
    std::size_t max_in_flight = 4;   // fan-out cap within a stage
    std::size_t pass_count = 1;      // >1 re-runs all stages with a scratchpad of prior finals
    long long stage_timeout_ms = 0;  // 0 = unlimited; checked before each call within a stage
    bool use_gold_evidence = false;  // stage 1 reads annotated spans instead of the model
};

/// One backend interaction, kept verbatim for the trace.
struct StageCall {
    Stage stage = Stage::Evidence;
    std::string prompt;
    std::string response;
    std::string error; // empty on success
};

/// Stage 2 record for one snippet: what came back from the index and what
/// the navigator kept.
struct SnippetTrace {
    std::string snippet;
    std::vector<RetrievedTerm> retrieved;
    std::vector<RetrievedTerm> selected;
};

/// Full per-note trace of one pipeline execution.
struct CodingRun {
    std::string note_id;
    std::vector<std::string> snippets;
    std::vector<SnippetTrace> located;
    std::map<std::string, std::vector<std::string>> chapter_groups; // chapter label -> codes, ascending
    std::vector<std::string> tentative;   // ascending
    std::vector<std::string> final_codes; // reconciler's order
    std::vector<StageCall> calls;
    std::vector<std::string> stage_errors; // "<stage>: <what>"
    std::vector<std::string> warnings;
    std::map<std::string, std::uint64_t> backend_calls; // per stage name
    std::map<std::string, double> timings_ms;           // in-memory only; serialization omits it
};

/// Partition by chapter; groups and their members are sorted ascending.
inline std::map<std::string, std::vector<std::string>> group_by_chapter(const std::set<std::string>& codes) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& code : codes) {
        groups[std::string(chapter_of(code.substr(0, 3)))].push_back(code);
    }
    return groups; // std::set iteration already yields ascending members
}

/// Everything a pipeline borrows: the loaded artifacts plus a backend it
/// may call from several threads at once.
struct EngineContext {
    const Taxonomy& taxonomy;
    const TermRetriever& retriever;
    const GuidelineSet& guidelines;
    const PromptLibrary& prompts;
    Backend& backend;
};

/// Analyze-Locate-Assign-Verify over one note. The pipeline owns no data.
class Pipeline {
public:
    /// Per-fan-out-item result plus everything the single-writer merge
    /// needs; also the return shape of the standalone stage entry points.
    template <typename T>
    struct StageOutcome {
        T value{};
        std::vector<StageCall> calls;
        std::vector<std::string> warnings;
        std::vector<std::string> errors;
    };

    Pipeline(const Taxonomy& taxonomy, const TermRetriever& retriever, const GuidelineSet& guidelines,
             const PromptLibrary& prompts, Backend& backend, PipelineConfig config = {})
        : taxonomy_(taxonomy),
          retriever_(retriever),
          guidelines_(guidelines),
          prompts_(prompts),
          backend_(backend),
          config_(config) {}

    Pipeline(const EngineContext& context, PipelineConfig config = {})
        : Pipeline(context.taxonomy, context.retriever, context.guidelines, context.prompts,
                   context.backend, config) {}

    const PipelineConfig& config() const { return config_; }

    /// Runs the validator alone on one candidate group; the controlled
    /// studies call the stages directly on synthetic candidate sets.
    StageOutcome<std::optional<std::string>> validate_group(const ClinicalNote& note,
                                                            const std::vector<std::string>& group) const {
        StageClock clock{.budget_ms = config_.stage_timeout_ms};
        return assign(note, note.text, group, clock);
    }

    /// Runs the reconciler alone on one candidate list.
    StageOutcome<std::vector<std::string>> reconcile_candidates(
        const ClinicalNote& note, const std::vector<std::string>& candidates) const {
        StageClock clock{.budget_ms = config_.stage_timeout_ms};
        return reconcile(note, note.text, candidates, clock);
    }

    CodingRun run(const ClinicalNote& note) const {
        if (note.text.empty()) throw Error(ErrorCode::EmptyInput, "note '" + note.id + "' has no text");
        CodingRun result = run_once(note, "");
        for (std::size_t pass = 1; pass < config_.pass_count; ++pass) {
            std::string scratchpad = scratchpad_for(result.final_codes);
            CodingRun next = run_once(note, scratchpad);
            // keep the latest answer but the whole conversation history
            next.calls.insert(next.calls.begin(), result.calls.begin(), result.calls.end());
            for (const auto& [stage, count] : result.backend_calls) next.backend_calls[stage] += count;
            next.stage_errors.insert(next.stage_errors.begin(), result.stage_errors.begin(),
                                     result.stage_errors.end());
            result = std::move(next);
        }
        return result;
    }

    std::vector<CodingRun> run_batch(const std::vector<ClinicalNote>& notes,
                                     std::size_t notes_in_flight = 1) const {
        return parallel_map<CodingRun>(notes.size(), notes_in_flight,
                                       [&](std::size_t i) { return run(notes[i]); });
    }

private:
    struct StageClock {
        std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
        long long budget_ms = 0;

        bool expired() const {
            if (budget_ms <= 0) return false;
            auto elapsed =
                std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
            return elapsed.count() > budget_ms;
        }
        double elapsed_ms() const {
            return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
    };

    static std::string scratchpad_for(const std::vector<std::string>& finals) {
        std::string pad = "\n\n[Previous pass assigned: ";
        for (std::size_t i = 0; i < finals.size(); ++i) {
            if (i) pad += ", ";
            pad += finals[i];
        }
        pad += finals.empty() ? "nothing]" : "]";
        return pad;
    }

    CodingRun run_once(const ClinicalNote& note, const std::string& scratchpad) const {
        CodingRun run;
        run.note_id = note.id;
        std::string note_text = note.text + scratchpad;

        // Stage 1: pull codeable snippets out of the note.
        {
            StageClock clock{.budget_ms = config_.stage_timeout_ms};
            auto piece = analyze(note, note_text, clock);
            run.snippets = std::move(piece.value);
            merge(run, Stage::Evidence, std::move(piece));
            run.timings_ms["evidence"] = clock.elapsed_ms();
        }

        // Stage 2: per snippet, retrieve index terms and let the navigator pick.
        std::set<std::string> navigator_codes;
        {
            StageClock clock{.budget_ms = config_.stage_timeout_ms};
            auto pieces = parallel_map<StageOutcome<SnippetTrace>>(
                run.snippets.size(), config_.max_in_flight,
                [&](std::size_t i) { return locate(note, note_text, run.snippets[i], clock); });
            for (auto& piece : pieces) {
                for (const auto& term : piece.value.selected) navigator_codes.insert(term.code.text);
                run.located.push_back(std::move(piece.value));
                merge(run, Stage::Navigator, std::move(piece));
            }
            run.timings_ms["navigator"] = clock.elapsed_ms();
        }

        // Stage 3: chapter by chapter, the validator keeps at most one code.
        run.chapter_groups = group_by_chapter(navigator_codes);
        {
            StageClock clock{.budget_ms = config_.stage_timeout_ms};
            std::vector<const std::vector<std::string>*> groups;
            groups.reserve(run.chapter_groups.size());
            for (const auto& [chapter, codes] : run.chapter_groups) groups.push_back(&codes);
            auto pieces = parallel_map<StageOutcome<std::optional<std::string>>>(
                groups.size(), config_.max_in_flight,
                [&](std::size_t i) { return assign(note, note_text, *groups[i], clock); });
            std::set<std::string> tentative;
            for (auto& piece : pieces) {
                if (piece.value) tentative.insert(*piece.value);
                merge(run, Stage::Validator, std::move(piece));
            }
            run.tentative.assign(tentative.begin(), tentative.end());
            run.timings_ms["validator"] = clock.elapsed_ms();
        }
        for (const auto& code : run.tentative) {
            if (taxonomy_.contains(code) && !taxonomy_.most_specific(code)) {
                run.warnings.push_back("validator kept non-leaf code " + code);
            }
        }

        // Stage 4: the reconciler orders and prunes the survivors.
        {
            StageClock clock{.budget_ms = config_.stage_timeout_ms};
            auto piece = reconcile(note, note_text, run.tentative, clock);
            run.final_codes = std::move(piece.value);
            merge(run, Stage::Reconciler, std::move(piece));
            run.timings_ms["reconciler"] = clock.elapsed_ms();
        }
        return run;
    }

    template <typename T>
    void merge(CodingRun& run, Stage stage, StageOutcome<T>&& piece) const {
        run.backend_calls[stage_name(stage)] += piece.calls.size();
        for (auto& call : piece.calls) run.calls.push_back(std::move(call));
        for (auto& warning : piece.warnings) run.warnings.push_back(std::move(warning));
        for (auto& error : piece.errors) run.stage_errors.push_back(std::move(error));
    }

    /// Renders, calls, decodes. On failure the piece gets the stage-tagged
    /// error and the caller sees std::nullopt.
    template <typename T>
    std::optional<std::string> invoke(Stage stage, const std::string& prompt, const ClinicalNote& note,
                                      const std::vector<std::string>& candidate_codes,
                                      const std::string& pattern, StageOutcome<T>& piece,
                                      const StageClock& clock) const {
        StageCall call;
        call.stage = stage;
        call.prompt = prompt;
        if (clock.expired()) {
            call.error = std::string(error_code_name(ErrorCode::Timeout)) + ": stage budget exhausted";
            piece.errors.push_back(std::string(stage_name(stage)) + ": stage budget exhausted");
            piece.calls.push_back(std::move(call));
            return std::nullopt;
        }
        try {
            BackendRequest request;
            request.stage = stage;
            request.mode = config_.mode;
            request.prompt = prompt;
            request.note_id = note.id;
            request.candidate_codes = candidate_codes;
            call.response = backend_.complete(request).text;
            Decoded decoded = decode_reply(call.response, config_.mode);
            if (config_.mode == DecodingMode::Constrained) {
                require_constrained_match(decoded.payload, pattern);
            }
            piece.calls.push_back(std::move(call));
            return std::optional<std::string>(std::move(decoded.payload));
        } catch (const Error& err) {
            call.error = err.what();
            piece.errors.push_back(std::string(stage_name(stage)) + ": " + err.what());
            piece.calls.push_back(std::move(call));
            return std::nullopt;
        }
    }

    StageOutcome<std::vector<std::string>> analyze(const ClinicalNote& note, const std::string& note_text,
                                                 const StageClock& clock) const {
        StageOutcome<std::vector<std::string>> piece;
        if (config_.use_gold_evidence) {
            std::set<std::string> seen;
            for (const auto& span : note.gold_evidence) {
                if (seen.insert(span.text).second) piece.value.push_back(span.text);
            }
            return piece;
        }
        RenderContext context;
        context.slots["note"] = note_text;
        std::string prompt = prompts_.render(Stage::Evidence, context, config_.mode);
        auto payload = invoke(Stage::Evidence, prompt, note, {}, constrained_strings_pattern(), piece, clock);
        if (!payload) return piece;
        std::set<std::string> seen;
        for (auto& snippet : extract_strings(*payload)) {
            if (seen.insert(snippet).second) piece.value.push_back(std::move(snippet));
        }
        return piece;
    }

    StageOutcome<SnippetTrace> locate(const ClinicalNote& note, const std::string& note_text,
                                    const std::string& snippet, const StageClock& clock) const {
        (void)note_text;
        StageOutcome<SnippetTrace> piece;
        piece.value.snippet = snippet;
        piece.value.retrieved = retriever_.retrieve(snippet, config_.top_k_terms);
        if (piece.value.retrieved.empty()) return piece;

        RenderContext context;
        context.slots["query"] = snippet;
        std::vector<std::string> candidate_codes;
        for (const auto& term : piece.value.retrieved) {
            context.items.push_back(term.display);
            candidate_codes.push_back(term.code.text);
        }
        std::string prompt = prompts_.render(Stage::Navigator, context, config_.mode);
        int max_id = static_cast<int>(piece.value.retrieved.size());
        auto payload = invoke(Stage::Navigator, prompt, note, candidate_codes,
                              constrained_id_pattern(max_id, true), piece, clock);
        if (!payload) return piece;
        try {
            IdSelection selection = extract_ids(*payload, max_id);
            if (selection.dropped_out_of_range) {
                piece.warnings.push_back("navigator answered " +
                                         std::to_string(selection.dropped_out_of_range) +
                                         " out-of-range id(s) for snippet '" + snippet + "'");
            }
            for (int id : selection.ids) {
                piece.value.selected.push_back(piece.value.retrieved[static_cast<std::size_t>(id - 1)]);
            }
        } catch (const Error& err) {
            piece.errors.push_back(std::string(stage_name(Stage::Navigator)) + ": " + err.what());
        }
        return piece;
    }

    StageOutcome<std::optional<std::string>> assign(const ClinicalNote& note, const std::string& note_text,
                                                  const std::vector<std::string>& group,
                                                  const StageClock& clock) const {
        StageOutcome<std::optional<std::string>> piece;
        if (group.empty()) return piece;

        std::vector<CodeId> ids;
        for (const auto& code : group) ids.push_back(parse_code_id(code));
        RenderContext context;
        context.slots["note"] = note_text;
        context.slots["guidelines"] = guideline_text(ids, piece.warnings);
        for (const auto& code : group) context.items.push_back(candidate_item(code));
        std::string prompt = prompts_.render(Stage::Validator, context, config_.mode);
        int max_id = static_cast<int>(group.size());
        auto payload =
            invoke(Stage::Validator, prompt, note, group, constrained_id_pattern(max_id, false), piece, clock);
        if (!payload) return piece;
        try {
            IdSelection selection = extract_ids(*payload, max_id);
            if (selection.dropped_out_of_range) {
                piece.warnings.push_back("validator answered an out-of-range id; treated as none");
            }
            if (!selection.ids.empty()) {
                piece.value = group[static_cast<std::size_t>(selection.ids.front() - 1)];
            }
        } catch (const Error& err) {
            piece.errors.push_back(std::string(stage_name(Stage::Validator)) + ": " + err.what());
        }
        return piece;
    }

    StageOutcome<std::vector<std::string>> reconcile(const ClinicalNote& note, const std::string& note_text,
                                                   const std::vector<std::string>& tentative,
                                                   const StageClock& clock) const {
        StageOutcome<std::vector<std::string>> piece;
        if (tentative.empty()) return piece;

        std::vector<CodeId> ids;
        for (const auto& code : tentative) ids.push_back(parse_code_id(code));
        RenderContext context;
        context.slots["note"] = note_text;
        context.slots["guidelines"] = guideline_text(ids, piece.warnings);
        context.slots["instructional_notes"] = instructional_text(tentative);
        for (const auto& code : tentative) context.items.push_back(candidate_item(code));
        std::string prompt = prompts_.render(Stage::Reconciler, context, config_.mode);
        int max_id = static_cast<int>(tentative.size());
        auto payload = invoke(Stage::Reconciler, prompt, note, tentative,
                              constrained_id_pattern(max_id, true), piece, clock);
        if (!payload) return piece;
        try {
            IdSelection selection = extract_ids(*payload, max_id);
            if (selection.dropped_out_of_range) {
                piece.warnings.push_back("reconciler answered out-of-range id(s); dropped");
            }
            for (int id : selection.ids) {
                piece.value.push_back(tentative[static_cast<std::size_t>(id - 1)]);
            }
        } catch (const Error& err) {
            piece.errors.push_back(std::string(stage_name(Stage::Reconciler)) + ": " + err.what());
        }
        return piece;
    }

    std::string candidate_item(const std::string& code) const {
        if (config_.context == ContextLevel::IdsOnly) return code;
        std::string description = taxonomy_.contains(code) ? taxonomy_.description_of(code) : "";
        return description.empty() ? code : code + ": " + description;
    }

    std::string guideline_text(const std::vector<CodeId>& ids, std::vector<std::string>& warnings) const {
        if (config_.context != ContextLevel::IdsDescriptionsGuidelines) return "";
        GuidelineSelection selection = guidelines_.for_codes(ids);
        for (const auto& chapter : selection.missing_chapters) {
            warnings.push_back("no guideline document for chapter " + chapter);
        }
        std::string text;
        for (std::size_t i = 0; i < selection.docs.size(); ++i) {
            if (i) text += "\n\n";
            text += selection.docs[i].chapter + "\n" + selection.docs[i].text;
        }
        return text;
    }

    std::string instructional_text(const std::vector<std::string>& codes) const {
        std::string text;
        for (const auto& code : codes) {
            if (!taxonomy_.contains(code)) continue;
            InstructionalNotes notes = taxonomy_.instructional_notes_for(code);
            if (notes.empty()) continue;
            if (!text.empty()) text += "\n";
            text += code + "\n";
            auto section = [&](const char* title, const std::vector<std::string>& list) {
                if (list.empty()) return;
                text += std::string("  ") + title + ":";
                for (const auto& item : list) text += " " + item + ";";
                text += "\n";
            };
            section("includes", notes.includes);
            section("excludes1", notes.excludes1);
            section("excludes2", notes.excludes2);
            section("code first", notes.code_first);
            section("use additional", notes.use_additional);
        }
        return text.empty() ? "(none)" : text;
    }

    const Taxonomy& taxonomy_;
    const TermRetriever& retriever_;
    const GuidelineSet& guidelines_;
    const PromptLibrary& prompts_;
    Backend& backend_;
    PipelineConfig config_;
};

} // namespace clh
