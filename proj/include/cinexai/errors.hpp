#pragma once

#include <stdexcept>
#include <string>

namespace cinexai {

/// Invalid argument or out-of-range configuration value supplied by a caller.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent shapes between a model and the data handed to it.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that cannot be processed: unreadable files, missing labels,
/// too few subjects.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A segmentation without the structure a measurement needs.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LandmarkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace cinexai
