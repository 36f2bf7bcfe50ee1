#pragma once

#include <stdexcept>
#include <string>

namespace sbcbf {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedShape : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct EmptySampleSet : Error { using Error::Error; };
struct OutsideDomain : Error { using Error::Error; };
struct InfeasibleQp : Error { using Error::Error; };
struct NumericalFailure : Error { using Error::Error; };
struct NotSafe : Error { using Error::Error; };
struct NonFiniteState : Error { using Error::Error; };
struct NoCleanSegment : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace sbcbf
