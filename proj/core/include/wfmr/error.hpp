#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wfmr {

enum class Errc {
  InvalidLength,
  InvalidDepth,
  InvalidShape,
  InvalidParams,
  InvalidPenalty,
  InvalidArgument,
  InvalidTarget,
  InvalidDesign,
  InvalidGrid,
  TooFewObservations,
  DegenerateComponent,
  NumericalFailure,
  UndefinedMetric,
  ParseError,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

/// Base exception for every failure raised by the library. The code is stable
/// and is what the command-line tool reports in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised by the EM driver when the objective stops being finite.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& message, std::vector<double> trace);

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

[[noreturn]] void raise(Errc code, const std::string& message);

}  // namespace wfmr
