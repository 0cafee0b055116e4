#ifndef SCALWEIGHT_ERROR_HPP
#define SCALWEIGHT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace scalweight {

// Invalid configuration, schema violation, or malformed input data.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients encountered while training.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem reads/writes that failed or produced corrupt bytes.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace scalweight

#endif
