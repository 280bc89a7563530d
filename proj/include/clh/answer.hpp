#pragma once

#include <cctype>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "clh/error.hpp"
#include "clh/prompts.hpp"

namespace clh {

/// A model reply split into its reasoning span and the payload the pipeline
/// actually consumes.
struct Decoded {
    std::string thinking;
    std::string payload;
};

/// Splits a thinking-mode reply on the last answer span: the final
/// closing tag paired with the nearest opening tag before it. Everything
/// ahead of that opening tag counts as reasoning.
inline Decoded parse_thinking_answer(const std::string& raw) {
    static constexpr std::string_view kOpen = "<answer>";
    static constexpr std::string_view kClose = "</answer>";
    std::size_t close = raw.rfind(kClose);
    if (close == std::string::npos) {
        throw Error(ErrorCode::NoAnswerTag, "reply has no closing answer tag");
    }
    std::size_t open = raw.rfind(kOpen, close);
    if (open == std::string::npos) {
        throw Error(ErrorCode::NoAnswerTag, "reply has no opening answer tag");
    }
    Decoded out;
    out.payload = raw.substr(open + kOpen.size(), close - open - kOpen.size());
    out.thinking = raw.substr(0, open);
    // trim a dangling reasoning terminator so the span reads clean
    std::size_t end = out.thinking.find_last_not_of(" \t\r\n");
    if (end != std::string::npos) {
        std::string_view tail(out.thinking.data(), end + 1);
        if (tail.size() >= 8 && tail.substr(tail.size() - 8) == "</think>") {
            out.thinking.erase(tail.size() - 8);
        }
    }
    return out;
}

/// Mode dispatch: thinking replies carry the payload inside answer tags,
/// constrained replies are the payload verbatim.
inline Decoded decode_reply(const std::string& raw, DecodingMode mode) {
    if (mode == DecodingMode::Thinking) return parse_thinking_answer(raw);
    return Decoded{"", raw};
}

/// Ids picked out of an answer payload. A literal 0 anywhere means "nothing
/// applies" and wins over every other id.
struct IdSelection {
    std::vector<int> ids;
    bool none_selected = false;
    std::size_t dropped_out_of_range = 0;
};

/// Pulls every run of digits out of the payload and keeps the in-range ones
/// in first-seen order. Throws NoIntegers when the payload has no digits at
/// all; oversized runs count as out of range rather than failing.
inline IdSelection extract_ids(const std::string& payload, int max_id) {
    IdSelection selection;
    bool saw_any = false;
    std::unordered_set<int> seen;
    std::size_t i = 0;
    while (i < payload.size()) {
        if (!std::isdigit(static_cast<unsigned char>(payload[i]))) {
            ++i;
            continue;
        }
        saw_any = true;
        long long value = 0;
        bool overflow = false;
        while (i < payload.size() && std::isdigit(static_cast<unsigned char>(payload[i]))) {
            if (!overflow) {
                value = value * 10 + (payload[i] - '0');
                if (value > 1'000'000'000LL) overflow = true;
            }
            ++i;
        }
        if (overflow || value > max_id) {
            ++selection.dropped_out_of_range;
            continue;
        }
        if (value == 0) {
            selection.none_selected = true;
            continue;
        }
        int id = static_cast<int>(value);
        if (seen.insert(id).second) selection.ids.push_back(id);
    }
    if (!saw_any) throw Error(ErrorCode::NoIntegers, "payload contains no integers");
    if (selection.none_selected) selection.ids.clear();
    return selection;
}

/// Splits a payload into comma-separated strings, honouring double quotes:
/// commas inside a quoted run do not split. Entries are trimmed, stripped
/// of symmetric quotes, and dropped when empty.
inline std::vector<std::string> extract_strings(const std::string& payload) {
    std::vector<std::string> parts;
    std::string current;
    bool in_quotes = false;
    for (char ch : payload) {
        if (ch == '"') {
            in_quotes = !in_quotes;
            current.push_back(ch);
        } else if (ch == ',' && !in_quotes) {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    parts.push_back(current);

    std::vector<std::string> out;
    for (auto& part : parts) {
        std::size_t begin = part.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) continue;
        std::size_t end = part.find_last_not_of(" \t\r\n");
        std::string trimmed = part.substr(begin, end - begin + 1);
        if (trimmed.size() >= 2 && trimmed.front() == '"' && trimmed.back() == '"') {
            trimmed = trimmed.substr(1, trimmed.size() - 2);
        }
        if (!trimmed.empty()) out.push_back(trimmed);
    }
    return out;
}

/// The exact reply grammar for constrained id selection: an enumeration of
/// every legal id, optionally comma-repeated when multiple picks are
/// allowed.
inline std::string constrained_id_pattern(int max_id, bool multiple) {
    std::string alt = "(0";
    for (int id = 1; id <= max_id; ++id) {
        alt += '|';
        alt += std::to_string(id);
    }
    alt += ')';
    std::string pattern = "\\s*" + alt;
    if (multiple) pattern += "(\\s*,\\s*" + alt + ")*";
    pattern += "\\s*";
    return pattern;
}

/// Constrained evidence replies are free text; the only requirement is
/// something non-empty to split.
inline std::string constrained_strings_pattern() { return "\\s*\\S[\\s\\S]*"; }

/// Full-match validation of a constrained reply. UnparseableResponse on
/// any deviation; the grammar is closed, so deviation means the reply is
/// unusable, not merely messy.
inline void require_constrained_match(const std::string& payload, const std::string& pattern) {
    std::regex re(pattern);
    if (!std::regex_match(payload, re)) {
        throw Error(ErrorCode::UnparseableResponse,
                    "constrained reply does not match its grammar: '" +
                        (payload.size() > 120 ? payload.substr(0, 120) + "..." : payload) + "'");
    }
}

} // namespace clh
