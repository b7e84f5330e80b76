#include "wmtrace/error.hpp"

namespace wmtrace {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::InvalidVocabulary: return "InvalidVocabulary";
    case ErrorKind::VocabularyMismatch: return "VocabularyMismatch";
    case ErrorKind::DegenerateNoise: return "DegenerateNoise";
    case ErrorKind::AllZeroMass: return "AllZeroMass";
    case ErrorKind::AbsoluteContinuityViolation: return "AbsoluteContinuityViolation";
    case ErrorKind::InvalidRates: return "InvalidRates";
    case ErrorKind::ZeroDivergence: return "ZeroDivergence";
    case ErrorKind::AlreadyDecided: return "AlreadyDecided";
    case ErrorKind::InvalidProbability: return "InvalidProbability";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace wmtrace
