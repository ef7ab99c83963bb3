#ifndef TBS_ERRORS_HPP
#define TBS_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tbs {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Domain error tied to one element of a vector (row, observation, column).
class IndexedDomainError : public DomainError {
 public:
  IndexedDomainError(const std::string& what, std::size_t index)
      : DomainError(what + " (index " + std::to_string(index) + ")"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A computation produced a non-finite or otherwise unusable value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tbs

#endif  // TBS_ERRORS_HPP
