#include "wfmr/error.hpp"

namespace wfmr {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidLength: return "InvalidLength";
    case Errc::InvalidDepth: return "InvalidDepth";
    case Errc::InvalidShape: return "InvalidShape";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::InvalidPenalty: return "InvalidPenalty";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidTarget: return "InvalidTarget";
    case Errc::InvalidDesign: return "InvalidDesign";
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::TooFewObservations: return "TooFewObservations";
    case Errc::DegenerateComponent: return "DegenerateComponent";
    case Errc::NumericalFailure: return "NumericalFailure";
    case Errc::UndefinedMetric: return "UndefinedMetric";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

NumericalFailure::NumericalFailure(const std::string& message, std::vector<double> trace)
    : Error(Errc::NumericalFailure, message), trace_(std::move(trace)) {}

void raise(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace wfmr
