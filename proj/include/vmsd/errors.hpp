#pragma once

#include <stdexcept>
#include <string>

namespace vmsd {

/// Invalid user-facing configuration: bad mesh parameters, unknown keys,
/// singular slab systems caused by degenerate input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or trajectory left the computational box.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Initial charge density does not integrate to zero, so E1 cannot have
/// compact support.
class NonNeutralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant (should be unreachable).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace vmsd
