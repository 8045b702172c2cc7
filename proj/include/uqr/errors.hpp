#pragma once

#include <stdexcept>
#include <string>

namespace uqr {

// Invalid input to an operation (mismatched manifolds, bad lengths, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A numerical budget was exceeded: atom cap, saturated packing, zero MC hits.
// The CLI maps this to exit status 3.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration. The CLI maps this to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant; indicates a bug rather than bad input.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace uqr
