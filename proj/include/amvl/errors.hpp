#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace amvl {

enum class ErrorCode {
    NotFound,
    Evicted,
    DimensionMismatch,
    DuplicateId,
    StorageFull,
    IoError,
    CorruptSnapshot,
    ClockRegression,
    FeedbackOutsideCandidates,
    CapExceeded,
    EmptySamples,
    ParseError,
    SchemaError,
    MissingMetric,
    InvalidArgument,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::Evicted: return "Evicted";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::StorageFull: return "StorageFull";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::CorruptSnapshot: return "CorruptSnapshot";
        case ErrorCode::ClockRegression: return "ClockRegression";
        case ErrorCode::FeedbackOutsideCandidates: return "FeedbackOutsideCandidates";
        case ErrorCode::CapExceeded: return "CapExceeded";
        case ErrorCode::EmptySamples: return "EmptySamples";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::MissingMetric: return "MissingMetric";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// One violated constraint from config validation.
struct ConfigViolation {
    std::string field;
    std::string constraint;
};

// Carries every violation found, not just the first.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<ConfigViolation> violations)
        : std::runtime_error(render(violations)), violations_(std::move(violations)) {}

    const std::vector<ConfigViolation>& violations() const { return violations_; }

private:
    static std::string render(const std::vector<ConfigViolation>& vs) {
        std::string out = "invalid config:";
        for (const auto& v : vs) {
            out += "\n  " + v.field + ": " + v.constraint;
        }
        return out;
    }

    std::vector<ConfigViolation> violations_;
};

}  // namespace amvl
