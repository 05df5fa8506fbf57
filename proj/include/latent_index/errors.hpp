#ifndef LATENT_INDEX_ERRORS_HPP_
#define LATENT_INDEX_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace latent_index {

// Precondition violated by the caller (bad order, tau outside (0,1), ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data breaks a documented invariant. The CLI maps these to exit 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A row of a delimited file failed validation.
class RowError : public ValidationError {
 public:
  RowError(std::string file, std::size_t line, const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// A unit's province, region and macro area do not nest consistently, or the
// province is absent from the province file.
class HierarchyError : public RowError {
 public:
  using RowError::RowError;
};

// Column layout of a table or design matrix does not match what is expected.
class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An item is constant across all units (all 0 or all 1).
class DegenerateItemError : public ValidationError {
 public:
  explicit DegenerateItemError(std::string item)
      : ValidationError("degenerate item '" + item +
                        "': responses are constant across units"),
        item_(std::move(item)) {}
  const std::string& item() const { return item_; }

 private:
  std::string item_;
};

// Floating point trouble: non-finite values, degenerate scaling, failed fits.
// The CLI maps these to exit 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A non-finite integrand value at a quadrature node.
class NumericalDomainError : public NumericalError {
 public:
  NumericalDomainError(const std::string& what, std::size_t node)
      : NumericalError(what + " (node " + std::to_string(node) + ")"),
        node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

class DegenerateScaleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace latent_index

#endif  // LATENT_INDEX_ERRORS_HPP_
