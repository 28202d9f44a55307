#pragma once

#include <stdexcept>

namespace relic {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, NumericError -> 3, FormatError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch inside a tensor op. Messages name the offending op.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid or inconsistent configuration value.
struct ConfigError : Error {
  using Error::Error;
};

// A caller violated an operation precondition (bad index, empty input, ...).
struct ContractError : Error {
  using Error::Error;
};

// NaN/Inf reached a place where the numeric policy says to abort.
struct NumericError : Error {
  using Error::Error;
};

// Malformed file: checkpoint, dataset or mask container.
struct FormatError : Error {
  using Error::Error;
};

}  // namespace relic
