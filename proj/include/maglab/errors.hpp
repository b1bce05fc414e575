#pragma once

#include <stdexcept>
#include <string>

namespace maglab {

// Argument outside the mathematical domain of an operation (zero norm, a <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid or inconsistent configuration (bad hyperparameters, n < 2, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Not enough data to compute a statistic.
class StatisticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Aggregated feature has (numerically) zero norm.
class AggregationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Training produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace maglab
