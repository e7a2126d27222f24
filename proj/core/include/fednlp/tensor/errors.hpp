#pragma once

#include <stdexcept>
#include <string>

namespace fednlp {

/// Shape or dimension disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An index (token id, label, row) outside its valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Invalid configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An API called in a state or with arguments it does not support.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fednlp
