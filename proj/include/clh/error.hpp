#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clh {

enum class ErrorCode {
    // taxonomy
    MalformedCode,
    UnknownChapter,
    OrphanNode,
    DuplicateCode,
    PrefixViolation,
    UnknownCode,
    DuplicateChapter,
    MissingGuideline,
    // retrieval
    EmptyIndex,
    DimensionMismatch,
    // backend
    BackendUnavailable,
    Timeout,
    UnparseableResponse,
    MissingSlot,
    NoAnswerTag,
    NoIntegers,
    // metrics / experiments
    EmptyInput,
    MissingStage,
    NoEvidence,
    EmptyGold,
    // plumbing
    InvalidConfig,
    IoError,
    ParseError,
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedCode: return "MalformedCode";
        case ErrorCode::UnknownChapter: return "UnknownChapter";
        case ErrorCode::OrphanNode: return "OrphanNode";
        case ErrorCode::DuplicateCode: return "DuplicateCode";
        case ErrorCode::PrefixViolation: return "PrefixViolation";
        case ErrorCode::UnknownCode: return "UnknownCode";
        case ErrorCode::DuplicateChapter: return "DuplicateChapter";
        case ErrorCode::MissingGuideline: return "MissingGuideline";
        case ErrorCode::EmptyIndex: return "EmptyIndex";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::UnparseableResponse: return "UnparseableResponse";
        case ErrorCode::MissingSlot: return "MissingSlot";
        case ErrorCode::NoAnswerTag: return "NoAnswerTag";
        case ErrorCode::NoIntegers: return "NoIntegers";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::MissingStage: return "MissingStage";
        case ErrorCode::NoEvidence: return "NoEvidence";
        case ErrorCode::EmptyGold: return "EmptyGold";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Engine-wide exception type carrying a stable error code plus context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace clh
