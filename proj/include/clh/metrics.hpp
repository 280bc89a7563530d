#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "clh/chapters.hpp"
#include "clh/error.hpp"
#include "clh/jsonl.hpp"
#include "clh/note.hpp"
#include "clh/pipeline.hpp"
#include "clh/retriever.hpp"

namespace clh {

/// One note's gold and predicted label sets; order never matters here.
struct NotePrediction {
    std::string note_id;
    std::set<std::string> gold;
    std::set<std::string> predicted;
};

struct LabelStats {
    std::string label;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    double f1 = 0.0;
};

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double emr = 0.0;
    std::size_t n_notes = 0;
    std::size_t n_labels = 0;
    std::vector<LabelStats> per_label; // ascending label
};

namespace detail {

inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline double f1_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
    double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

} // namespace detail

/// Share of notes whose predicted set equals gold exactly; two empty sets
/// count as a match.
inline double emr(const std::vector<NotePrediction>& preds) {
    if (preds.empty()) throw Error(ErrorCode::EmptyInput, "no notes to score");
    std::size_t exact = 0;
    for (const auto& p : preds) {
        if (p.gold == p.predicted) ++exact;
    }
    return static_cast<double>(exact) / static_cast<double>(preds.size());
}

/// Pooled (micro) and per-label (macro) scores. The label universe is
/// whatever occurs in gold or predictions, optionally intersected with a
/// fixed list; labels that never occur contribute nothing. A split with no
/// activity at all counts as perfect, which keeps EMR=1 implying micro=1.
inline EvalReport micro_macro(const std::vector<NotePrediction>& preds,
                              const std::optional<std::set<std::string>>& label_filter = std::nullopt) {
    if (preds.empty()) throw Error(ErrorCode::EmptyInput, "no notes to score");
    std::map<std::string, LabelStats> by_label;
    for (const auto& p : preds) {
        for (const auto& code : p.predicted) {
            if (label_filter && !label_filter->count(code)) continue;
            auto& stats = by_label[code];
            stats.label = code;
            if (p.gold.count(code)) ++stats.tp;
            else ++stats.fp;
        }
        for (const auto& code : p.gold) {
            if (label_filter && !label_filter->count(code)) continue;
            auto& stats = by_label[code];
            stats.label = code;
            if (!p.predicted.count(code)) ++stats.fn;
        }
    }

    EvalReport report;
    report.n_notes = preds.size();
    std::uint64_t tp = 0, fp = 0, fn = 0;
    double f1_sum = 0.0;
    for (auto& [label, stats] : by_label) {
        stats.f1 = detail::f1_from_counts(stats.tp, stats.fp, stats.fn);
        tp += stats.tp;
        fp += stats.fp;
        fn += stats.fn;
        f1_sum += stats.f1;
        report.per_label.push_back(stats);
    }
    report.n_labels = by_label.size();
    if (tp + fp + fn == 0) {
        report.precision = report.recall = report.micro_f1 = report.macro_f1 = 1.0;
    } else {
        report.precision = detail::safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
        report.recall = detail::safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
        report.micro_f1 = detail::f1_from_counts(tp, fp, fn);
        report.macro_f1 = detail::safe_div(f1_sum, static_cast<double>(report.n_labels));
    }
    report.emr = emr(preds);
    return report;
}

/// The code set a run implies at each stage, cumulatively: everything
/// retrieved, what the navigator kept, what the validators kept, and the
/// reconciled output.
inline std::array<std::set<std::string>, 4> stage_sets(const CodingRun& run) {
    std::array<std::set<std::string>, 4> sets;
    for (const auto& trace : run.located) {
        for (const auto& term : trace.retrieved) sets[0].insert(term.code.text);
        for (const auto& term : trace.selected) sets[1].insert(term.code.text);
    }
    sets[2].insert(run.tentative.begin(), run.tentative.end());
    sets[3].insert(run.final_codes.begin(), run.final_codes.end());
    return sets;
}

inline constexpr std::array<const char*, 4> kStageEvalNames{"retrieval", "navigator", "validator",
                                                            "reconciler"};

/// Scores each stage's cumulative output. By default every stage is held
/// to the full gold set; with recondition_gold, stage s only answers for
/// gold codes the previous stage still carried, so each score isolates
/// that stage's own loss.
inline std::array<EvalReport, 4> stage_eval(const std::vector<CodingRun>& runs,
                                            const std::vector<ClinicalNote>& notes,
                                            bool recondition_gold = false) {
    if (runs.empty()) throw Error(ErrorCode::EmptyInput, "no runs to score");
    std::unordered_map<std::string, const ClinicalNote*> by_id;
    for (const auto& note : notes) by_id[note.id] = &note;

    std::array<std::vector<NotePrediction>, 4> per_stage;
    for (const auto& run : runs) {
        auto it = by_id.find(run.note_id);
        if (it == by_id.end() || it->second->gold_codes.empty()) {
            throw Error(ErrorCode::EmptyGold, "run '" + run.note_id + "' has no gold codes to score against");
        }
        std::set<std::string> gold(it->second->gold_codes.begin(), it->second->gold_codes.end());
        auto sets = stage_sets(run);
        std::set<std::string> stage_gold = gold;
        for (std::size_t s = 0; s < 4; ++s) {
            if (recondition_gold && s > 0) {
                std::set<std::string> narrowed;
                for (const auto& code : stage_gold) {
                    if (sets[s - 1].count(code)) narrowed.insert(code);
                }
                stage_gold = std::move(narrowed);
            }
            per_stage[s].push_back({run.note_id, stage_gold, sets[s]});
        }
    }
    std::array<EvalReport, 4> reports;
    for (std::size_t s = 0; s < 4; ++s) reports[s] = micro_macro(per_stage[s]);
    return reports;
}

/// One chapter's pooled recall@k along both query axes: the snippets the
/// model produced and the annotated evidence spans.
struct ChapterRecallRow {
    std::string chapter;
    double agent_recall = 0.0;
    double evidence_recall = 0.0;
    std::size_t n_gold = 0;
};

struct ChapterRecallReport {
    std::vector<ChapterRecallRow> rows; // ascending chapter label
    std::size_t skipped_no_evidence = 0;
};

/// Compares what the retriever reaches from run snippets against what it
/// reaches from gold evidence spans, pooled per chapter over all gold
/// codes. Notes without evidence spans are skipped and tallied; notes
/// without snippets still count, they just reach nothing on the agent axis.
inline ChapterRecallReport chapter_recall(const std::vector<CodingRun>& runs,
                                          const std::vector<ClinicalNote>& notes,
                                          const TermRetriever& retriever, std::size_t k = 25) {
    std::unordered_map<std::string, const CodingRun*> run_by_id;
    for (const auto& run : runs) run_by_id[run.note_id] = &run;

    struct Tally {
        std::size_t gold = 0;
        std::size_t agent_hit = 0;
        std::size_t evidence_hit = 0;
    };
    std::map<std::string, Tally> by_chapter;
    ChapterRecallReport report;

    for (const auto& note : notes) {
        if (note.gold_evidence.empty()) {
            ++report.skipped_no_evidence;
            continue;
        }
        std::set<std::string> agent_reached;
        if (auto it = run_by_id.find(note.id); it != run_by_id.end()) {
            for (const auto& snippet : it->second->snippets) {
                for (const auto& term : retriever.retrieve(snippet, k)) agent_reached.insert(term.code.text);
            }
        }
        std::set<std::string> evidence_reached;
        for (const auto& span : note.gold_evidence) {
            for (const auto& term : retriever.retrieve(span.text, k)) evidence_reached.insert(term.code.text);
        }
        for (const auto& gold : note.gold_codes) {
            auto& tally = by_chapter[std::string(chapter_of(gold.substr(0, 3)))];
            ++tally.gold;
            if (agent_reached.count(gold)) ++tally.agent_hit;
            if (evidence_reached.count(gold)) ++tally.evidence_hit;
        }
    }
    for (const auto& [chapter, tally] : by_chapter) {
        ChapterRecallRow row;
        row.chapter = chapter;
        row.n_gold = tally.gold;
        row.agent_recall = detail::safe_div(static_cast<double>(tally.agent_hit),
                                            static_cast<double>(tally.gold));
        row.evidence_recall = detail::safe_div(static_cast<double>(tally.evidence_hit),
                                               static_cast<double>(tally.gold));
        report.rows.push_back(row);
    }
    return report;
}

inline ojson report_to_json(const EvalReport& report, bool include_labels = true) {
    ojson out = ojson::object();
    out["precision"] = report.precision;
    out["recall"] = report.recall;
    out["micro_f1"] = report.micro_f1;
    out["macro_f1"] = report.macro_f1;
    out["emr"] = report.emr;
    out["n_notes"] = report.n_notes;
    out["n_labels"] = report.n_labels;
    if (include_labels) {
        ojson labels = ojson::array();
        for (const auto& stats : report.per_label) {
            ojson item = ojson::object();
            item["label"] = stats.label;
            item["tp"] = stats.tp;
            item["fp"] = stats.fp;
            item["fn"] = stats.fn;
            item["f1"] = stats.f1;
            labels.push_back(std::move(item));
        }
        out["per_label"] = std::move(labels);
    }
    return out;
}

inline void write_per_label_csv(std::ostream& out, const EvalReport& report) {
    out << "label,tp,fp,fn,f1\n";
    for (const auto& stats : report.per_label) {
        out << stats.label << ',' << stats.tp << ',' << stats.fp << ',' << stats.fn << ','
            << ojson(stats.f1).dump() << '\n';
    }
}

} // namespace clh
