#pragma once

#include <stdexcept>
#include <string>

namespace langevin {

// Malformed or inconsistent configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pair of particles (or a particle and the origin source when N = 1) is
// closer than the collision guard.
class CollisionError : public std::runtime_error {
 public:
  CollisionError(const std::string& what, int i, int j)
      : std::runtime_error(what), first(i), second(j) {}
  int first;
  int second;
};

// Pair potential evaluated at zero separation.
class SingularInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation not defined for the given model or diffusion kind.
class KindError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace langevin
