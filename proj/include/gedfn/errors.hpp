#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gedfn {

/// Base for every error raised by the library. The `kind()` tag is what the
/// CLI prints as its machine-parsable prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Invalid argument passed to an operation (bad p, m, fraction, ...).
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error("parameter", what) {}
};

/// Shapes or preconditions violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

/// Synthetic data could not be produced (predictor quota, factorization).
class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& what) : Error("generation", what) {}
};

/// All outcome probabilities were equal, so no threshold separates classes.
class LabelDegeneracyError : public Error {
 public:
  explicit LabelDegeneracyError(const std::string& what)
      : Error("label-degeneracy", what) {}
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what) : Error("split", what) {}
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error("divergence", what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& what) : Error("evaluation", what) {}
};

class ScoringError : public Error {
 public:
  explicit ScoringError(const std::string& what) : Error("scoring", what) {}
};

/// Input files could not be read or reconciled.
class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& what) : Error("ingestion", what) {}
};

}  // namespace gedfn
