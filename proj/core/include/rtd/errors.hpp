#pragma once

#include <stdexcept>
#include <string>

namespace rtd {

// Base for everything the engine throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidEvidence : public Error {
 public:
  using Error::Error;
};

class InvalidMask : public Error {
 public:
  using Error::Error;
};

class InvalidThreshold : public Error {
 public:
  using Error::Error;
};

class ScopeError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Evidence (or a reduced network) carries zero probability.
class ZeroMassError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, diagram file, or command-line input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rtd
