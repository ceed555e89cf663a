#pragma once

#include <stdexcept>
#include <string>

namespace moddpo {

// Vector or matrix shapes that do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value outside the mathematical domain of an operation (log of zero,
// negative exponent on a zero probability, non-finite input).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Ill-posed hyperparameters or run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke a documented calling contract (e.g. mixed-modality batch).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Unreadable or malformed file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace moddpo
