#pragma once

#include <stdexcept>
#include <string>

namespace pccal {

/// Bad input: malformed files, inconsistent shapes, out-of-range settings.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (singular factorization, optimizer, sampler).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pccal
