#pragma once

#include <istream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "clh/code_id.hpp"
#include "clh/error.hpp"
#include "clh/jsonl.hpp"

namespace clh {

/// A human-annotated character range of the note justifying one code.
/// The span text is materialized at load time for convenience.
struct EvidenceSpan {
    std::string code;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string text;
};

struct ClinicalNote {
    std::string id;
    std::string text;
    std::string doc_type;
    std::vector<std::string> gold_codes;     // may be empty for unlabelled notes
    std::vector<EvidenceSpan> gold_evidence; // requires gold codes when present
};

/// Loads {id, text, doc_type?, gold_codes?, gold_evidence?} records. Ids are
/// unique, texts non-empty, gold codes well-formed and distinct, and every
/// evidence span must lie inside the text and name one of the gold codes.
inline std::vector<ClinicalNote> load_notes(std::istream& in, const std::string& source = "notes.jsonl") {
    std::vector<ClinicalNote> notes;
    std::unordered_set<std::string> seen_ids;
    JsonlReader reader(in, source);
    reader.for_each([&](std::size_t line_no, const json& record) {
        std::string context = source + ":" + std::to_string(line_no);
        if (!record.is_object()) throw Error(ErrorCode::ParseError, context + ": record must be an object");
        ClinicalNote note;
        note.id = record.value("id", "");
        if (note.id.empty()) throw Error(ErrorCode::ParseError, context + ": id must be non-empty");
        if (!seen_ids.insert(note.id).second) {
            throw Error(ErrorCode::ParseError, context + ": duplicate note id '" + note.id + "'");
        }
        note.text = record.value("text", "");
        if (note.text.empty()) throw Error(ErrorCode::ParseError, context + ": text must be non-empty");
        note.doc_type = record.value("doc_type", "");

        std::set<std::string> gold;
        if (record.contains("gold_codes")) {
            if (!record.at("gold_codes").is_array()) {
                throw Error(ErrorCode::ParseError, context + ": gold_codes must be an array");
            }
            for (const auto& item : record.at("gold_codes")) {
                std::string text = item.get<std::string>();
                try {
                    parse_code_id(text);
                } catch (const Error& err) {
                    throw Error(err.code(), context + ": " + err.what());
                }
                if (!gold.insert(text).second) {
                    throw Error(ErrorCode::ParseError, context + ": duplicate gold code '" + text + "'");
                }
                note.gold_codes.push_back(text);
            }
        }

        if (record.contains("gold_evidence")) {
            for (const auto& item : record.at("gold_evidence")) {
                EvidenceSpan span;
                span.code = item.value("code", "");
                span.begin = item.value("begin", std::size_t{0});
                span.end = item.value("end", std::size_t{0});
                if (span.begin >= span.end || span.end > note.text.size()) {
                    throw Error(ErrorCode::ParseError,
                                context + ": evidence span [" + std::to_string(span.begin) + ", " +
                                    std::to_string(span.end) + ") outside text bounds");
                }
                if (!gold.count(span.code)) {
                    throw Error(ErrorCode::ParseError,
                                context + ": evidence span code '" + span.code + "' is not a gold code");
                }
                span.text = note.text.substr(span.begin, span.end - span.begin);
                note.gold_evidence.push_back(std::move(span));
            }
        }
        notes.push_back(std::move(note));
    });
    return notes;
}

/// Canonical JSONL form of a note list, mirroring what load_notes accepts.
inline void write_notes(std::ostream& out, const std::vector<ClinicalNote>& notes) {
    JsonlWriter writer(out);
    for (const auto& note : notes) {
        ojson record = ojson::object();
        record["id"] = note.id;
        record["text"] = note.text;
        if (!note.doc_type.empty()) record["doc_type"] = note.doc_type;
        if (!note.gold_codes.empty()) record["gold_codes"] = note.gold_codes;
        if (!note.gold_evidence.empty()) {
            ojson spans = ojson::array();
            for (const auto& span : note.gold_evidence) {
                ojson item = ojson::object();
                item["code"] = span.code;
                item["begin"] = span.begin;
                item["end"] = span.end;
                spans.push_back(std::move(item));
            }
            record["gold_evidence"] = std::move(spans);
        }
        writer.write(record);
    }
}

} // namespace clh
