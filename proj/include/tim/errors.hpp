#pragma once

#include <stdexcept>
#include <string>

namespace tim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument or an operation applied to the wrong kind of entity.
struct DomainError : Error {
  using Error::Error;
};

// A timestamp earlier than the message it refers to.
struct ClockInversion : DomainError {
  using DomainError::DomainError;
};

// A protocol event arrived in an order the handler cannot accept.
struct ProtocolOrderError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace tim
