#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blr {

enum class ErrorCode {
    // data / input errors
    MissingColumn,
    MissingValue,
    UnknownCategoryLevel,
    OrphanFallEvent,
    InconsistentFellFlag,
    DuplicatePatient,
    BadFallIndex,
    MalformedInput,
    StageMismatch,
    UnknownVariable,
    OutOfRange,
    InvalidConfig,
    InvalidSchema,
    DegenerateFold,
    SingleClass,
    UnknownPatient,
    EmptyEnsemble,
    LiteralWeightsUndefined,
    // numeric errors
    DimensionMismatch,
    NonpositiveSigma2,
    SingularHessian,
    NonFiniteObjective,
    GridDegenerate,
    NotConverged,
    AllCandidatesFailed,
    BoundsTooNarrow,
    EffectiveSampleTooSmall,
    InvalidProposal,
};

std::string_view to_string(ErrorCode code);

/// Base of every exception thrown by the library. Carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message);
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Bad input data, schema, or configuration (CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

/// Optimizer / approximation failure (CLI exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace blr
