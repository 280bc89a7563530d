#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "clh/chapters.hpp"
#include "clh/error.hpp"

namespace clh {

/// A validated diagnosis code with its position in the taxonomy.
/// `is_leaf` is unknown until the code is attached to a hierarchy.
struct CodeId {
    std::string text;     // canonical form, e.g. "A22.7"
    std::string chapter;  // chapter range label, e.g. "A00–B99"
    std::string category; // first three characters, e.g. "A22"
    std::optional<bool> is_leaf;

    friend bool operator==(const CodeId& a, const CodeId& b) { return a.text == b.text; }
    friend bool operator<(const CodeId& a, const CodeId& b) { return a.text < b.text; }
};

namespace detail {
inline bool is_upper_alnum(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}
} // namespace detail

/// Shape check only: one uppercase letter, two alphanumerics, then
/// optionally a dot followed by 1–4 alphanumerics.
inline bool code_text_well_formed(std::string_view text) {
    if (text.size() < 3) return false;
    if (text[0] < 'A' || text[0] > 'Z') return false;
    if (!detail::is_upper_alnum(text[1]) || !detail::is_upper_alnum(text[2])) return false;
    if (text.size() == 3) return true;
    if (text[3] != '.') return false;
    std::string_view tail = text.substr(4);
    if (tail.empty() || tail.size() > 4) return false;
    for (char c : tail) {
        if (!detail::is_upper_alnum(c)) return false;
    }
    return true;
}

/// Parses a trimmed code string into a CodeId with chapter and category
/// resolved. Throws MalformedCode on a pattern mismatch and UnknownChapter
/// when the category prefix is outside the chapter table.
inline CodeId parse_code_id(std::string_view text) {
    if (!code_text_well_formed(text)) {
        throw Error(ErrorCode::MalformedCode, "'" + std::string(text) + "'");
    }
    CodeId code;
    code.text = std::string(text);
    code.category = code.text.substr(0, 3);
    code.chapter = chapter_of(code.category);
    return code;
}

/// Code text with the dot removed, the form used for hierarchy prefix checks.
inline std::string undotted(std::string_view code_text) {
    std::string out;
    out.reserve(code_text.size());
    for (char c : code_text) {
        if (c != '.') out.push_back(c);
    }
    return out;
}

} // namespace clh
