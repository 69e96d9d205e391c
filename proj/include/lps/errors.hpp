#ifndef LPS_ERRORS_HPP
#define LPS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lps {

// Argument outside the mathematical domain of an operation or density.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// API misuse: shape mismatch, foreign tape, out-of-range index.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (dataset lines, config files).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Not enough data to fit something the configuration asks for.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite objective or gradient during optimization.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite network output at inference time.
struct InferenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined for the given input (single class, constant truth, ...).
struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lps

#endif
