#pragma once

#include <stdexcept>
#include <string>

namespace si3 {

// Bad input: malformed files, inconsistent shapes, infeasible settings.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation that failed at run time (non-finite loss, divergence).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::string term)
      : std::runtime_error(what), term_(std::move(term)) {}

  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace si3
