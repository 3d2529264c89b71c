#include "kneescout/error.hpp"

namespace kneescout {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingMetadata: return "MissingMetadata";
        case ErrorCode::NonMonotonicCycles: return "NonMonotonicCycles";
        case ErrorCode::NonPositiveCapacity: return "NonPositiveCapacity";
        case ErrorCode::NonPositiveNominal: return "NonPositiveNominal";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::EvenWindow: return "EvenWindow";
        case ErrorCode::WindowTooLarge: return "WindowTooLarge";
        case ErrorCode::OrderTooHigh: return "OrderTooHigh";
        case ErrorCode::SeriesTooShort: return "SeriesTooShort";
        case ErrorCode::DegenerateWindow: return "DegenerateWindow";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::MissingCycle: return "MissingCycle";
        case ErrorCode::NoVoltageOverlap: return "NoVoltageOverlap";
        case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
        case ErrorCode::FeatureCountMismatch: return "FeatureCountMismatch";
        case ErrorCode::ZeroTrueValue: return "ZeroTrueValue";
        case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
        case ErrorCode::InsufficientUnmaskedRegion: return "InsufficientUnmaskedRegion";
        case ErrorCode::MaxIterationsReached: return "MaxIterationsReached";
        case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
        case ErrorCode::NonFiniteResidual: return "NonFiniteResidual";
        case ErrorCode::FitDiverged: return "FitDiverged";
        case ErrorCode::ConstantInput: return "ConstantInput";
    }
    return "Unknown";
}

bool is_numerical(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InsufficientUnmaskedRegion:
        case ErrorCode::MaxIterationsReached:
        case ErrorCode::SingularNormalEquations:
        case ErrorCode::NonFiniteResidual:
        case ErrorCode::FitDiverged:
        case ErrorCode::ConstantInput:
        case ErrorCode::TooShort:
        case ErrorCode::SeriesTooShort:
            return true;
        default:
            return false;
    }
}

}  // namespace kneescout
