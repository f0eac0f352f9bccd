#pragma once

#include <stdexcept>
#include <string>

namespace dmem {

// Error hierarchy used across the library. Each maps to one failure class:
// shapes, domains, container state machines, indexing, and API contracts.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct StateError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

struct ContractError : Error {
  using Error::Error;
};

struct IngestionError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

}  // namespace dmem
