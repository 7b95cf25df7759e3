#include "e2r/error.hpp"

namespace e2r {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::NoKeypoints: return "NoKeypoints";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::NoInBoundsPoints: return "NoInBoundsPoints";
    case ErrorCode::ParamMismatch: return "ParamMismatch";
    case ErrorCode::DegenerateHeatmap: return "DegenerateHeatmap";
    case ErrorCode::EmptyLibrary: return "EmptyLibrary";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::ProviderTimeout: return "ProviderTimeout";
    case ErrorCode::ProviderRejected: return "ProviderRejected";
    case ErrorCode::MissingAttachment: return "MissingAttachment";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::MissingLexiconEntry: return "MissingLexiconEntry";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::PortUnavailable: return "PortUnavailable";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::NotReplayable: return "NotReplayable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return 2;
    case ErrorCode::ConfigInvalid:
      return 3;
    case ErrorCode::NotFound:
      return 4;
    case ErrorCode::MalformedRecord:
    case ErrorCode::EmptyStream:
      return 5;
    case ErrorCode::TooFewSamples:
    case ErrorCode::ZeroDuration:
    case ErrorCode::NoInBoundsPoints:
    case ErrorCode::ParamMismatch:
    case ErrorCode::DegenerateHeatmap:
      return 6;
    case ErrorCode::InsufficientPoints:
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::NoKeypoints:
    case ErrorCode::InsufficientMatches:
    case ErrorCode::NoConsensus:
      return 7;
    case ErrorCode::EmptyLibrary:
    case ErrorCode::IllegalTransition:
    case ErrorCode::ProviderTimeout:
    case ErrorCode::ProviderRejected:
    case ErrorCode::MissingAttachment:
      return 8;
    case ErrorCode::NotReplayable:
      return 9;
    case ErrorCode::PortUnavailable:
      return 11;
    case ErrorCode::EmptyDocument:
    case ErrorCode::CorpusTooSmall:
    case ErrorCode::MissingLexiconEntry:
      return 12;
    case ErrorCode::Io:
      return 70;
  }
  return 70;
}

}  // namespace e2r
