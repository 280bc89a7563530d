#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "clh/chapters.hpp"
#include "clh/code_id.hpp"
#include "clh/error.hpp"
#include "clh/jsonl.hpp"

namespace clh {

/// Per-node coding directives. Lists hold free text and may be empty;
/// duplicates within a list are collapsed on load.
struct InstructionalNotes {
    std::vector<std::string> includes;
    std::vector<std::string> excludes1;
    std::vector<std::string> excludes2;
    std::vector<std::string> code_first;
    std::vector<std::string> use_additional;

    bool empty() const {
        return includes.empty() && excludes1.empty() && excludes2.empty() && code_first.empty() &&
               use_additional.empty();
    }

    friend bool operator==(const InstructionalNotes& a, const InstructionalNotes& b) {
        return a.includes == b.includes && a.excludes1 == b.excludes1 && a.excludes2 == b.excludes2 &&
               a.code_first == b.code_first && a.use_additional == b.use_additional;
    }
};

/// A node of the tabular hierarchy: either an assignable-form code
/// ("A22", "A22.7") or a non-assignable block label ("A00–B99").
struct TabularNode {
    std::string label;
    bool is_block = false;
    std::optional<CodeId> code; // set for non-block nodes
    std::string description;
    InstructionalNotes notes;
    int parent = -1;
    std::vector<int> children;

    bool is_leaf() const { return children.empty(); }
};

/// One alphabetical-index entry: a term path (main term, then subterms)
/// pointing at a candidate code, which need not be a leaf.
struct IndexEntry {
    std::vector<std::string> term_path;
    std::string display; // term_path joined with ", "
    CodeId code;
};

struct GuidelineDoc {
    std::string chapter; // chapter range label
    std::string text;
};

/// Result of a guideline lookup; absent chapters are reported, not fatal.
struct GuidelineSelection {
    std::vector<GuidelineDoc> docs;
    std::vector<std::string> missing_chapters;
};

namespace detail {

inline std::vector<std::string> dedup_preserving_order(const std::vector<std::string>& in) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& s : in) {
        if (seen.insert(s).second) out.push_back(s);
    }
    return out;
}

inline void append_note_list(std::vector<std::string>& target, const std::vector<std::string>& extra) {
    std::unordered_set<std::string> seen(target.begin(), target.end());
    for (const auto& s : extra) {
        if (seen.insert(s).second) target.push_back(s);
    }
}

inline std::vector<std::string> parse_string_list(const json& value, const std::string& context) {
    if (!value.is_array()) throw Error(ErrorCode::ParseError, context + " must be an array");
    std::vector<std::string> out;
    for (const auto& item : value) {
        if (!item.is_string()) throw Error(ErrorCode::ParseError, context + " entries must be strings");
        out.push_back(item.get<std::string>());
    }
    return dedup_preserving_order(out);
}

inline InstructionalNotes parse_notes(const json& value, const std::string& context) {
    InstructionalNotes notes;
    if (value.is_null()) return notes;
    if (!value.is_object()) throw Error(ErrorCode::ParseError, context + ": notes must be an object");
    for (const auto& [key, list] : value.items()) {
        if (key == "includes") notes.includes = parse_string_list(list, context + ".includes");
        else if (key == "excludes1") notes.excludes1 = parse_string_list(list, context + ".excludes1");
        else if (key == "excludes2") notes.excludes2 = parse_string_list(list, context + ".excludes2");
        else if (key == "code_first") notes.code_first = parse_string_list(list, context + ".code_first");
        else if (key == "use_additional")
            notes.use_additional = parse_string_list(list, context + ".use_additional");
        else throw Error(ErrorCode::ParseError, context + ": unknown notes key '" + key + "'");
    }
    return notes;
}

inline ojson notes_to_json(const InstructionalNotes& notes) {
    ojson out = ojson::object();
    if (!notes.includes.empty()) out["includes"] = notes.includes;
    if (!notes.excludes1.empty()) out["excludes1"] = notes.excludes1;
    if (!notes.excludes2.empty()) out["excludes2"] = notes.excludes2;
    if (!notes.code_first.empty()) out["code_first"] = notes.code_first;
    if (!notes.use_additional.empty()) out["use_additional"] = notes.use_additional;
    return out;
}

struct RangeLabel {
    std::string start;
    std::string end;
};

inline RangeLabel split_range(const std::string& canonical_label) {
    // canonical form is "XNN<en dash>XNN"
    return RangeLabel{canonical_label.substr(0, 3), canonical_label.substr(canonical_label.size() - 3)};
}

} // namespace detail

/// The tabular hierarchy. Built once from a JSONL stream, immutable after,
/// safe for unrestricted concurrent reads.
class Taxonomy {
public:
    Taxonomy() = default;

    /// Loads records of the form {code, description, parent, notes}.
    /// `code` is either an assignable-form code or a block range label;
    /// `parent` is empty (or absent) for roots. Rejects duplicates, orphan
    /// parents, and children that do not extend their parent.
    static Taxonomy load_tabular(std::istream& in, const std::string& source = "tabular.jsonl") {
        Taxonomy tax;
        struct PendingEdge {
            int node;
            std::string parent_label;
            std::size_t line;
        };
        std::vector<PendingEdge> edges;

        JsonlReader reader(in, source);
        reader.for_each([&](std::size_t line_no, const json& record) {
            if (!record.is_object())
                throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": record must be an object");
            std::string code_text = record.value("code", "");
            std::string context = source + ":" + std::to_string(line_no);

            TabularNode node;
            if (auto range = normalize_range_label(code_text)) {
                node.label = *range;
                node.is_block = true;
            } else {
                CodeId id;
                try {
                    id = parse_code_id(code_text);
                } catch (const Error& err) {
                    throw Error(err.code(), context + ": " + err.what());
                }
                node.label = id.text;
                node.code = std::move(id);
            }
            node.description = record.value("description", "");
            node.notes = detail::parse_notes(record.contains("notes") ? record.at("notes") : json(nullptr), context);

            if (tax.by_label_.count(node.label)) {
                throw Error(ErrorCode::DuplicateCode, context + ": '" + node.label + "' already defined");
            }
            int idx = static_cast<int>(tax.nodes_.size());
            tax.by_label_[node.label] = idx;
            tax.nodes_.push_back(std::move(node));

            std::string parent = record.value("parent", "");
            if (!parent.empty()) {
                if (auto range = normalize_range_label(parent)) parent = *range;
                edges.push_back({idx, parent, line_no});
            }
        });

        for (const auto& edge : edges) {
            auto it = tax.by_label_.find(edge.parent_label);
            if (it == tax.by_label_.end()) {
                throw Error(ErrorCode::OrphanNode,
                            source + ":" + std::to_string(edge.line) + ": parent '" + edge.parent_label +
                                "' of '" + tax.nodes_[static_cast<std::size_t>(edge.node)].label + "' not found");
            }
            tax.link(it->second, edge.node, source, edge.line);
        }
        for (auto& node : tax.nodes_) {
            if (node.code) node.code->is_leaf = node.children.empty();
        }
        return tax;
    }

    /// Canonical JSONL form; load_tabular(serialize(t)) reproduces t.
    void serialize(std::ostream& out) const {
        JsonlWriter writer(out);
        for (const auto& node : nodes_) {
            ojson record = ojson::object();
            record["code"] = node.label;
            record["description"] = node.description;
            record["parent"] = node.parent >= 0 ? nodes_[static_cast<std::size_t>(node.parent)].label : "";
            if (!node.notes.empty()) record["notes"] = detail::notes_to_json(node.notes);
            writer.write(record);
        }
    }

    bool empty() const { return nodes_.empty(); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<TabularNode>& nodes() const { return nodes_; }

    const TabularNode* find(const std::string& label) const {
        auto it = by_label_.find(label);
        return it == by_label_.end() ? nullptr : &nodes_[static_cast<std::size_t>(it->second)];
    }

    bool contains(const std::string& label) const { return by_label_.count(label) > 0; }

    /// Union of the node's notes and all ancestors' notes, nearest-first,
    /// deduplicated per list. Pure; throws UnknownCode for unknown labels.
    InstructionalNotes instructional_notes_for(const std::string& label) const {
        const TabularNode* node = find(label);
        if (!node) throw Error(ErrorCode::UnknownCode, "'" + label + "' not in hierarchy");
        InstructionalNotes merged;
        while (node) {
            detail::append_note_list(merged.includes, node->notes.includes);
            detail::append_note_list(merged.excludes1, node->notes.excludes1);
            detail::append_note_list(merged.excludes2, node->notes.excludes2);
            detail::append_note_list(merged.code_first, node->notes.code_first);
            detail::append_note_list(merged.use_additional, node->notes.use_additional);
            node = node->parent >= 0 ? &nodes_[static_cast<std::size_t>(node->parent)] : nullptr;
        }
        return merged;
    }

    /// True iff the label names an assignable leaf. Blocks are never
    /// assignable. Throws UnknownCode for unknown labels.
    bool most_specific(const std::string& label) const {
        const TabularNode* node = find(label);
        if (!node) throw Error(ErrorCode::UnknownCode, "'" + label + "' not in hierarchy");
        if (node->is_block) return false;
        return node->is_leaf();
    }

    std::string description_of(const std::string& label) const {
        const TabularNode* node = find(label);
        if (!node) throw Error(ErrorCode::UnknownCode, "'" + label + "' not in hierarchy");
        return node->description;
    }

    /// All non-block code texts, ascending. The code-description corpus for
    /// hard-negative sampling.
    std::vector<std::string> assignable_codes() const {
        std::vector<std::string> out;
        for (const auto& node : nodes_) {
            if (!node.is_block) out.push_back(node.label);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    void link(int parent_idx, int child_idx, const std::string& source, std::size_t line) {
        TabularNode& parent = nodes_[static_cast<std::size_t>(parent_idx)];
        TabularNode& child = nodes_[static_cast<std::size_t>(child_idx)];
        std::string context = source + ":" + std::to_string(line);

        if (parent.is_block && child.is_block) {
            auto p = detail::split_range(parent.label);
            auto c = detail::split_range(child.label);
            if (c.start < p.start || c.end > p.end) {
                throw Error(ErrorCode::PrefixViolation,
                            context + ": block '" + child.label + "' not contained in '" + parent.label + "'");
            }
        } else if (parent.is_block && !child.is_block) {
            auto p = detail::split_range(parent.label);
            const std::string& category = child.code->category;
            if (category < p.start || category > p.end) {
                throw Error(ErrorCode::PrefixViolation,
                            context + ": '" + child.label + "' outside block '" + parent.label + "'");
            }
        } else if (!parent.is_block && !child.is_block) {
            std::string parent_flat = undotted(parent.label);
            std::string child_flat = undotted(child.label);
            if (child_flat.size() <= parent_flat.size() ||
                child_flat.compare(0, parent_flat.size(), parent_flat) != 0) {
                throw Error(ErrorCode::PrefixViolation,
                            context + ": '" + child.label + "' does not extend '" + parent.label + "'");
            }
        } else {
            throw Error(ErrorCode::PrefixViolation,
                        context + ": block '" + child.label + "' cannot sit below code '" + parent.label + "'");
        }
        child.parent = parent_idx;
        parent.children.push_back(child_idx);
    }

    std::vector<TabularNode> nodes_;
    std::unordered_map<std::string, int> by_label_;
};

/// Loads alphabetical-index records {term_path, code}. Every code must pass
/// code validation; the flattened display is the term path joined by ", ".
inline std::vector<IndexEntry> load_alpha_index(std::istream& in,
                                                const std::string& source = "alpha_index.jsonl") {
    std::vector<IndexEntry> entries;
    JsonlReader reader(in, source);
    reader.for_each([&](std::size_t line_no, const json& record) {
        std::string context = source + ":" + std::to_string(line_no);
        if (!record.is_object() || !record.contains("term_path") || !record.contains("code")) {
            throw Error(ErrorCode::ParseError, context + ": expected {term_path, code}");
        }
        IndexEntry entry;
        if (!record.at("term_path").is_array() || record.at("term_path").empty()) {
            throw Error(ErrorCode::ParseError, context + ": term_path must be a non-empty array");
        }
        for (const auto& part : record.at("term_path")) {
            if (!part.is_string() || part.get<std::string>().empty()) {
                throw Error(ErrorCode::ParseError, context + ": term_path parts must be non-empty strings");
            }
            entry.term_path.push_back(part.get<std::string>());
        }
        for (std::size_t i = 0; i < entry.term_path.size(); ++i) {
            if (i) entry.display += ", ";
            entry.display += entry.term_path[i];
        }
        try {
            entry.code = parse_code_id(record.at("code").get<std::string>());
        } catch (const Error& err) {
            throw Error(err.code(), context + ": " + err.what());
        }
        entries.push_back(std::move(entry));
    });
    return entries;
}

/// Chapter-keyed guideline documents.
class GuidelineSet {
public:
    static GuidelineSet load(std::istream& in, const std::string& source = "guidelines.jsonl") {
        GuidelineSet set;
        JsonlReader reader(in, source);
        reader.for_each([&](std::size_t line_no, const json& record) {
            std::string context = source + ":" + std::to_string(line_no);
            if (!record.is_object()) throw Error(ErrorCode::ParseError, context + ": record must be an object");
            std::string chapter = record.value("chapter", "");
            auto normalized = normalize_range_label(chapter);
            if (!normalized || !chapter_label_index(*normalized)) {
                throw Error(ErrorCode::UnknownChapter, context + ": '" + chapter + "'");
            }
            std::string text = record.value("text", "");
            if (text.empty()) throw Error(ErrorCode::ParseError, context + ": text must be non-empty");
            if (set.by_chapter_.count(*normalized)) {
                throw Error(ErrorCode::DuplicateChapter, context + ": '" + *normalized + "'");
            }
            set.by_chapter_[*normalized] = GuidelineDoc{*normalized, std::move(text)};
        });
        return set;
    }

    bool empty() const { return by_chapter_.empty(); }
    std::size_t size() const { return by_chapter_.size(); }

    const GuidelineDoc* find(const std::string& chapter) const {
        auto it = by_chapter_.find(chapter);
        return it == by_chapter_.end() ? nullptr : &it->second;
    }

    /// Documents for exactly the distinct chapters of the given codes, in
    /// chapter order. Chapters without a document are reported as missing.
    GuidelineSelection for_codes(const std::vector<CodeId>& candidates) const {
        std::set<std::size_t> chapter_indices;
        for (const auto& code : candidates) {
            if (auto idx = chapter_label_index(code.chapter)) chapter_indices.insert(*idx);
        }
        GuidelineSelection selection;
        for (std::size_t idx : chapter_indices) {
            std::string label(chapter_table()[idx].label);
            if (const GuidelineDoc* doc = find(label)) {
                selection.docs.push_back(*doc);
            } else {
                selection.missing_chapters.push_back(label);
            }
        }
        return selection;
    }

private:
    std::map<std::string, GuidelineDoc> by_chapter_;
};

} // namespace clh
