#include "dacq/error.hpp"

namespace dacq {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::DomainTooLarge: return "DomainTooLarge";
    case ErrorCode::NotMonotone: return "NotMonotone";
    case ErrorCode::Syntax: return "SyntaxError";
    case ErrorCode::Semantic: return "SemanticError";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::DuplicateFact: return "DuplicateFact";
    case ErrorCode::AnnotationParse: return "ParseError";
    case ErrorCode::MissingDomain: return "MissingDomain";
    case ErrorCode::NotFreeConnex: return "NotFreeConnex";
    case ErrorCode::NotIdempotent: return "NotIdempotent";
    case ErrorCode::NotLocallyAnnotated: return "NotLocallyAnnotated";
    case ErrorCode::NotFull: return "NotFull";
    case ErrorCode::SelfJoin: return "SelfJoin";
    case ErrorCode::ZBlockViolation: return "ZBlockViolation";
    case ErrorCode::DisruptiveTrio: return "DisruptiveTrio";
    case ErrorCode::Cyclic: return "Cyclic";
    case ErrorCode::WeightOverflow: return "WeightOverflow";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::Usage: return "UsageError";
    case ErrorCode::Io: return "IoError";
    }
    return "Unknown";
}

}  // namespace dacq
