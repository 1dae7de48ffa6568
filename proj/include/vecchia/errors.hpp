#ifndef VECCHIA_ERRORS_HPP
#define VECCHIA_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vecchia {

using Index = std::ptrdiff_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unsupported sizes (n <= m, shape mismatch, guard exceeded).
class SizeError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

/// A batched kernel failed on one entry of the batch.
class BatchEntryError : public Error {
 public:
  BatchEntryError(const std::string& what, Index entry)
      : Error(what + " (batch entry " + std::to_string(entry) + ")"), entry_(entry) {}
  Index entry() const noexcept { return entry_; }

 private:
  Index entry_;
};

class NotPositiveDefiniteError : public BatchEntryError {
 public:
  using BatchEntryError::BatchEntryError;
};

class SingularError : public BatchEntryError {
 public:
  using BatchEntryError::BatchEntryError;
};

/// The likelihood is undefined at the requested parameters: a conditioning
/// matrix is not positive definite or a conditional variance is <= 0.
/// block() is the batch index (0 = joint first block).
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, Index block)
      : Error(what + " (block " + std::to_string(block) + ")"), block_(block) {}
  Index block() const noexcept { return block_; }

 private:
  Index block_;
};

class RegressionError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, Index line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  Index line() const noexcept { return line_; }

 private:
  Index line_;
};

}  // namespace vecchia

#endif  // VECCHIA_ERRORS_HPP
