#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace innovnet {

// Base type for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- parameter validation ----------------------------------------------------

// One violated constraint, as reported by check_params(). `constraint` holds
// the machine-readable name (matching the exception type thrown by validate()),
// `detail` says which entry/column is at fault and by how much.
struct ConstraintViolation {
  std::string constraint;
  std::string detail;
};

struct NonNegativityViolation : Error { using Error::Error; };
struct ColumnSumViolation : Error { using Error::Error; };
struct ReducibleMatrix : Error { using Error::Error; };
struct LambdaDiagonalNonPositive : Error { using Error::Error; };
struct InadmissibleIntensity : Error { using Error::Error; };

// --- spectral ------------------------------------------------------------------

struct ConvergenceFailure : Error { using Error::Error; };
struct StabilityViolation : Error { using Error::Error; };
struct RankDeficiency : Error { using Error::Error; };

// --- simulation ----------------------------------------------------------------

struct UnknownColor : Error { using Error::Error; };
struct TooLarge : Error { using Error::Error; };

// --- estimation & inference -----------------------------------------------------

struct InsufficientData : Error { using Error::Error; };
struct ZeroDenominator : Error { using Error::Error; };
struct InadmissibleNull : Error { using Error::Error; };
struct DegenerateCounts : Error { using Error::Error; };

// --- io --------------------------------------------------------------------------

struct IoError : Error { using Error::Error; };
struct EmptyStream : Error { using Error::Error; };

}  // namespace innovnet
