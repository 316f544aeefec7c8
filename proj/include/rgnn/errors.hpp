#pragma once

#include <stdexcept>
#include <string>

namespace rgnn {

// Error taxonomy. The CLI maps these onto process exit codes
// (config -> 1, data -> 2, numeric -> 3).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct ContractError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

}  // namespace rgnn
