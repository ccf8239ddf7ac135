#pragma once

#include <stdexcept>
#include <string>

namespace oef {

// Bad or missing input data (images, datasets, truncated files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration inconsistencies, model/config or format version mismatches.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace oef
