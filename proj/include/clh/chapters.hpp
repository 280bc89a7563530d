#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "clh/error.hpp"

namespace clh {

/// One chapter of the diagnosis taxonomy, keyed by its category range.
/// `label` uses an en dash ("A00–B99"), matching the printed convention.
struct Chapter {
    std::string_view start;
    std::string_view end;
    std::string_view label;
    std::string_view title;
};

/// The 22 chapters. Ranges are disjoint and sorted, so a 3-character
/// category resolves by lexicographic containment. Stable across yearly
/// code releases, hence shipped as a fixed table.
inline const std::array<Chapter, 22>& chapter_table() {
    static const std::array<Chapter, 22> table = {{
        {"A00", "B99", "A00–B99", "Certain infectious and parasitic diseases"},
        {"C00", "D49", "C00–D49", "Neoplasms"},
        {"D50", "D89", "D50–D89", "Diseases of the blood and blood-forming organs"},
        {"E00", "E89", "E00–E89", "Endocrine, nutritional and metabolic diseases"},
        {"F01", "F99", "F01–F99", "Mental, behavioral and neurodevelopmental disorders"},
        {"G00", "G99", "G00–G99", "Diseases of the nervous system"},
        {"H00", "H59", "H00–H59", "Diseases of the eye and adnexa"},
        {"H60", "H95", "H60–H95", "Diseases of the ear and mastoid process"},
        {"I00", "I99", "I00–I99", "Diseases of the circulatory system"},
        {"J00", "J99", "J00–J99", "Diseases of the respiratory system"},
        {"K00", "K95", "K00–K95", "Diseases of the digestive system"},
        {"L00", "L99", "L00–L99", "Diseases of the skin and subcutaneous tissue"},
        {"M00", "M99", "M00–M99", "Diseases of the musculoskeletal system and connective tissue"},
        {"N00", "N99", "N00–N99", "Diseases of the genitourinary system"},
        {"O00", "O9A", "O00–O9A", "Pregnancy, childbirth and the puerperium"},
        {"P00", "P96", "P00–P96", "Certain conditions originating in the perinatal period"},
        {"Q00", "Q99", "Q00–Q99", "Congenital malformations, deformations and chromosomal abnormalities"},
        {"R00", "R99", "R00–R99", "Symptoms, signs and abnormal findings, not elsewhere classified"},
        {"S00", "T88", "S00–T88", "Injury, poisoning and certain other consequences of external causes"},
        {"U00", "U85", "U00–U85", "Codes for special purposes"},
        {"V00", "Y99", "V00–Y99", "External causes of morbidity"},
        {"Z00", "Z99", "Z00–Z99", "Factors influencing health status and contact with health services"},
    }};
    return table;
}

/// Index into chapter_table() for a 3-character category, if covered.
inline std::optional<std::size_t> chapter_index_of(std::string_view category) {
    const auto& table = chapter_table();
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (category >= table[i].start && category <= table[i].end) return i;
    }
    return std::nullopt;
}

/// Chapter label for a category (e.g. "A22" -> "A00–B99").
/// Throws UnknownChapter when the category falls outside every range.
inline std::string chapter_of(std::string_view category) {
    auto idx = chapter_index_of(category);
    if (!idx) {
        throw Error(ErrorCode::UnknownChapter,
                    "category '" + std::string(category) + "' is outside the chapter table");
    }
    return std::string(chapter_table()[*idx].label);
}

/// Position of a chapter label inside the canonical chapter order.
inline std::optional<std::size_t> chapter_label_index(std::string_view label) {
    const auto& table = chapter_table();
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (label == table[i].label) return i;
    }
    return std::nullopt;
}

/// Normalizes a range label: accepts ASCII hyphen between the two category
/// endpoints and canonicalizes to the en-dash form. Returns nullopt when the
/// text is not a range label at all.
inline std::optional<std::string> normalize_range_label(std::string_view text) {
    auto is_cat = [](std::string_view s) {
        if (s.size() != 3) return false;
        if (s[0] < 'A' || s[0] > 'Z') return false;
        for (char c : s.substr(1)) {
            if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))) return false;
        }
        return true;
    };
    static const std::string en_dash = "–";
    std::string_view lhs, rhs;
    if (text.size() == 3 + en_dash.size() + 3 && text.substr(3, en_dash.size()) == en_dash) {
        lhs = text.substr(0, 3);
        rhs = text.substr(3 + en_dash.size());
    } else if (text.size() == 7 && text[3] == '-') {
        lhs = text.substr(0, 3);
        rhs = text.substr(4);
    } else {
        return std::nullopt;
    }
    if (!is_cat(lhs) || !is_cat(rhs) || rhs < lhs) return std::nullopt;
    return std::string(lhs) + en_dash + std::string(rhs);
}

} // namespace clh
