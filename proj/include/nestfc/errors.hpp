#pragma once

#include <stdexcept>
#include <string>

namespace nestfc {

/// Malformed or inconsistent input data (CSV rows, archives, shapes).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization or density evaluation failed (non-SPD matrix, non-finite
/// log-density, W = 0 in a diagnostic).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nestfc
