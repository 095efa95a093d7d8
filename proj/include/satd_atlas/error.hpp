#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace satd {

enum class ErrorCode {
    Io,
    Config,
    CloneUnavailable,
    EmptyHistory,
    CountInversion,
    AuthFailure,
    RateLimited,
    NotFound,
    PartialSync,
    DanglingReference,
    MalformedLine,
    SchemaMismatch,
    EmptyTermSet,
    DimensionMismatch,
    ZeroVector,
    EmptyCorpus,
    SetMismatch,
    InsufficientData,
    MissingLabel,
    LengthMismatch,
    DegenerateInput,
    TooFewItems,
    UnknownNode,
    ProviderFailure,
};

constexpr std::string_view to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
    case ErrorCode::CloneUnavailable: return "CloneUnavailable";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::CountInversion: return "CountInversion";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::PartialSync: return "PartialSync";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EmptyTermSet: return "EmptyTermSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::SetMismatch: return "SetMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TooFewItems: return "TooFewItems";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto its exit-code contract.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace satd
