#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kneescout {

enum class ErrorCode {
    // input-side failures
    MissingColumn,
    MissingFile,
    ParseError,
    MissingMetadata,
    NonMonotonicCycles,
    NonPositiveCapacity,
    NonPositiveNominal,
    TooShort,
    EvenWindow,
    WindowTooLarge,
    OrderTooHigh,
    SeriesTooShort,
    DegenerateWindow,
    IndexOutOfRange,
    LengthMismatch,
    InvalidArgument,
    InvalidSpec,
    MissingCycle,
    NoVoltageOverlap,
    EmptyTrainingSet,
    NonFiniteFeature,
    FeatureCountMismatch,
    ZeroTrueValue,
    UnknownSubcommand,
    // numerical failures
    InsufficientUnmaskedRegion,
    MaxIterationsReached,
    SingularNormalEquations,
    NonFiniteResidual,
    FitDiverged,
    ConstantInput,
};

std::string_view to_string(ErrorCode code) noexcept;

// True for failures that come from the numerics rather than from bad input.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace kneescout
