#pragma once

#include <stdexcept>
#include <string>

namespace mwdml {

/// Invalid arguments or domain violations in library calls.
class DomainError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent configuration documents.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// File system failures while reading or writing artifacts.
class IoError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Numerical failures (singular systems, non-finite scores).
class NumericalError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace mwdml
