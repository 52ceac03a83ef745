#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ipvs {

// Error taxonomy shared by all modules. The CLI prints `name(kind)` on failure.
enum class ErrorKind {
  DegenerateView,
  InsufficientViews,
  IllConditioned,
  BehindCamera,
  InvalidTolerance,
  InvalidRadius,
  InvalidConfig,
  OutOfPlaneMotion,
  SearchExhausted,
  ShapeMismatch,
  EmptyDataset,
  LeakedInsertion,
  NotDifferentiableKind,
  SaturatedCorrection,
  AllInsertionsFailed,
  TooFewInsertions,
  ModelsNotDeployed,
  InsufficientData,
  IoError,
  FormatError,
};

std::string_view name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ipvs
