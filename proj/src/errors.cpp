#include "blr/errors.hpp"

#include <fmt/format.h>

namespace blr {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::UnknownCategoryLevel: return "UnknownCategoryLevel";
    case ErrorCode::OrphanFallEvent: return "OrphanFallEvent";
    case ErrorCode::InconsistentFellFlag: return "InconsistentFellFlag";
    case ErrorCode::DuplicatePatient: return "DuplicatePatient";
    case ErrorCode::BadFallIndex: return "BadFallIndex";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::StageMismatch: return "StageMismatch";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::DegenerateFold: return "DegenerateFold";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::UnknownPatient: return "UnknownPatient";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::LiteralWeightsUndefined: return "LiteralWeightsUndefined";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonpositiveSigma2: return "NonpositiveSigma2";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::GridDegenerate: return "GridDegenerate";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::AllCandidatesFailed: return "AllCandidatesFailed";
    case ErrorCode::BoundsTooNarrow: return "BoundsTooNarrow";
    case ErrorCode::EffectiveSampleTooSmall: return "EffectiveSampleTooSmall";
    case ErrorCode::InvalidProposal: return "InvalidProposal";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string &message)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)), code_{code} {}

} // namespace blr
