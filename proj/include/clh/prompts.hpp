#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "clh/error.hpp"
#include "clh/jsonl.hpp"

namespace clh {

enum class Stage { Evidence, Navigator, Validator, Reconciler };

inline const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::Evidence: return "evidence";
        case Stage::Navigator: return "navigator";
        case Stage::Validator: return "validator";
        case Stage::Reconciler: return "reconciler";
    }
    return "?";
}

inline Stage parse_stage(const std::string& name) {
    if (name == "evidence") return Stage::Evidence;
    if (name == "navigator") return Stage::Navigator;
    if (name == "validator") return Stage::Validator;
    if (name == "reconciler") return Stage::Reconciler;
    throw Error(ErrorCode::InvalidConfig, "unknown stage '" + name + "'");
}

constexpr std::array<Stage, 4> kAllStages{Stage::Evidence, Stage::Navigator, Stage::Validator,
                                          Stage::Reconciler};

/// Thinking prompts end with an open reasoning tag and the model streams
/// free text; constrained prompts drop that tag and the reply must match a
/// task-specific pattern exactly.
enum class DecodingMode { Thinking, Constrained };

inline const char* decoding_mode_name(DecodingMode mode) {
    return mode == DecodingMode::Thinking ? "thinking" : "constrained";
}

inline DecodingMode parse_decoding_mode(const std::string& name) {
    if (name == "thinking") return DecodingMode::Thinking;
    if (name == "constrained") return DecodingMode::Constrained;
    throw Error(ErrorCode::InvalidConfig, "unknown decoding mode '" + name + "'");
}

inline constexpr const char* kEvidenceTemplate = R"TPL(You are a highly skilled medical coding assistant trained to extract key lead terms from clinical notes.

Your task is to analyze clinical notes and exhaustively extract the most relevant lead terms and their modifiers.

====== Now let's start! ======
Clinical Note: {{ note }}

Analyze the clinical note and extract the most relevant lead terms. 

Please reason step by step, and output your final answer as a comma-separated list of strings within <answer>...</answer>.
<think>
)TPL";

inline constexpr const char* kNavigatorTemplate = R"TPL(You are a highly skilled medical coding assistant specializing in structured code extraction from clinical notes.

Your task is to analyze text for medical terminology to output the few most relevant terms from the alphabetical index.

====== Alphabetical Index ======
ID: {{ loop.index }} | Term: "{{ term }}" | ID END: {{ loop.index }}

====== Now let's start! ======
Text: {{ query }}

Analyze the alphabetic index against the text and select the IDs of the most relevant terms. 

If no terms are relevant, output ID 0. 

Please reason step by step, and output your final answer as the IDs of the selected term within <answer>...</answer>.
<think>
)TPL";

inline constexpr const char* kValidatorTemplate = R"TPL(You are a highly skilled medical coding assistant specializing in structured code extraction from clinical notes.

Your task is to analyze the clinical note and identify the relevant candidate codes.
    
Note that a clinical note may record many codes, but you are given a subset of candidate codes, where none or one is assignable.

====== Now let's start! ======
Clinical Note: {{ custom_tojson(note | escape) }}

====== Guidelines ======
{{ guidelines }}

====== Candidate Codes ======
ID: {{ loop.index }} |  Code: {{ code }} | ID END: {{ loop.index }}

Analyze the clinical note against the guidelines to select the ID of the most appropriate code. 

If no relevant codes are found, output ID 0. 

Please reason step by step, and output your final answer as the ID of the selected code within <answer>...</answer>.
<think>
)TPL";

inline constexpr const char* kReconcilerTemplate = R"TPL(You are a highly skilled medical coding assistant specializing in structured code extraction from clinical notes.

Note that a clinical note may record many codes, but you are given a subset of candidate codes where one or more are assignable.

====== Now let's start! ======
Clinical Note: {{ note }}

====== Guidelines ======
{{ guidelines }}

====== Instructional Notes ======
{{ instructional_notes }}

====== Candidate Codes ======
ID: {{ loop.index }} |  Code: {{ code }} | ID END: {{ loop.index }}

Analyze the clinical note against the guidelines and the instructional notes to select the IDs of all assignable codes, prioritizing precision over recall. 

Please reason step by step, and output your final answer as the IDs of the selected codes within <answer>...</answer>.
<think>
)TPL";

/// What a template gets rendered against: named scalar slots plus the
/// ordered candidate list that loop lines repeat over.
struct RenderContext {
    std::map<std::string, std::string> slots;
    std::vector<std::string> items;
};

namespace detail {

inline std::string html_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out.push_back(ch);
        }
    }
    return out;
}

inline std::string json_quote(const std::string& text) { return json(text).dump(); }

inline std::string trim_copy(std::string_view text) {
    std::size_t begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    std::size_t end = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(begin, end - begin + 1));
}

/// Substitutes one {{ ... }} expression. Supported forms: a bare slot name
/// and custom_tojson(<name> | escape), which HTML-escapes then JSON-quotes.
inline std::string eval_expression(const std::string& expr, const RenderContext& context,
                                   const std::string& stage) {
    std::string body = trim_copy(expr);
    bool tojson = false;
    bool escape = false;
    if (body.rfind("custom_tojson(", 0) == 0 && body.back() == ')') {
        tojson = true;
        body = trim_copy(body.substr(14, body.size() - 15));
    }
    if (auto bar = body.find('|'); bar != std::string::npos) {
        std::string filter = trim_copy(body.substr(bar + 1));
        if (filter != "escape") {
            throw Error(ErrorCode::ParseError, stage + " template: unsupported filter '" + filter + "'");
        }
        escape = true;
        body = trim_copy(body.substr(0, bar));
    }
    auto it = context.slots.find(body);
    if (it == context.slots.end()) {
        throw Error(ErrorCode::MissingSlot, stage + " template references unbound slot '" + body + "'");
    }
    std::string value = it->second;
    if (escape) value = html_escape(value);
    if (tojson) value = json_quote(value);
    return value;
}

/// Replaces every {{ ... }} in a single line, with loop variables resolved
/// from `item`/`index` when the line is a loop line.
inline std::string substitute_line(const std::string& line, const RenderContext& context,
                                   const std::string& stage, const std::string* item, std::size_t index) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = line.find("{{", pos);
        if (open == std::string::npos) {
            out.append(line, pos, std::string::npos);
            return out;
        }
        std::size_t close = line.find("}}", open + 2);
        if (close == std::string::npos) {
            throw Error(ErrorCode::ParseError, stage + " template: unterminated expression");
        }
        out.append(line, pos, open - pos);
        std::string expr = trim_copy(line.substr(open + 2, close - open - 2));
        if (item && expr == "loop.index") {
            out += std::to_string(index);
        } else if (item && expr.find('(') == std::string::npos && expr.find('|') == std::string::npos &&
                   !context.slots.count(expr)) {
            out += *item; // the loop variable, whatever the template calls it
        } else {
            out += eval_expression(expr, context, stage);
        }
        pos = close + 2;
    }
}

} // namespace detail

/// Expands a template against a context. Lines mentioning loop.index repeat
/// once per candidate item (1-based); empty item lists erase those lines.
inline std::string render_template(const std::string& template_text, const RenderContext& context,
                                   DecodingMode mode, const std::string& stage = "prompt") {
    std::string body = template_text;
    if (mode == DecodingMode::Constrained) {
        // drop the trailing reasoning opener line
        std::size_t end = body.find_last_not_of(" \t\r\n");
        if (end != std::string::npos) {
            std::string_view tail(body);
            tail = tail.substr(0, end + 1);
            if (tail.size() >= 7 && tail.substr(tail.size() - 7) == "<think>") {
                std::size_t line_start = tail.find_last_of('\n', tail.size() - 7);
                body = line_start == std::string::npos ? std::string{}
                                                       : body.substr(0, line_start + 1);
            }
        }
    }
    std::istringstream lines(body);
    std::string out;
    std::string line;
    bool trailing_newline = !body.empty() && body.back() == '\n';
    bool first = true;
    while (std::getline(lines, line)) {
        if (!first) out.push_back('\n');
        first = false;
        if (line.find("{{ loop.index }}") != std::string::npos) {
            for (std::size_t i = 0; i < context.items.size(); ++i) {
                if (i) out.push_back('\n');
                out += detail::substitute_line(line, context, stage, &context.items[i], i + 1);
            }
            if (context.items.empty() && !out.empty() && out.back() == '\n') out.pop_back();
        } else {
            out += detail::substitute_line(line, context, stage, nullptr, 0);
        }
    }
    if (trailing_newline) out.push_back('\n');
    return out;
}

/// The four stage templates; built-ins unless overridden from a directory
/// of <stage>.txt files.
class PromptLibrary {
public:
    static PromptLibrary builtin() {
        PromptLibrary lib;
        lib.texts_[Stage::Evidence] = kEvidenceTemplate;
        lib.texts_[Stage::Navigator] = kNavigatorTemplate;
        lib.texts_[Stage::Validator] = kValidatorTemplate;
        lib.texts_[Stage::Reconciler] = kReconcilerTemplate;
        return lib;
    }

    /// Overrides any of evidence/navigator/validator/reconciler .txt found
    /// under dir; the rest stay built-in.
    static PromptLibrary from_directory(const std::filesystem::path& dir) {
        PromptLibrary lib = builtin();
        for (Stage stage : kAllStages) {
            auto path = dir / (std::string(stage_name(stage)) + ".txt");
            if (std::filesystem::exists(path)) {
                std::ifstream in(path, std::ios::binary);
                if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
                std::ostringstream buf;
                buf << in.rdbuf();
                lib.texts_[stage] = buf.str();
            }
        }
        return lib;
    }

    const std::string& text(Stage stage) const { return texts_.at(stage); }

    std::string render(Stage stage, const RenderContext& context, DecodingMode mode) const {
        return render_template(texts_.at(stage), context, mode, stage_name(stage));
    }

private:
    std::map<Stage, std::string> texts_;
};

} // namespace clh
