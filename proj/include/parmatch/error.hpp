#pragma once

#include <stdexcept>
#include <string>

namespace parmatch {

// Invalid or inconsistent configuration: bad strategy weights, a memory
// budget that fits no pair, unknown columns. The CLI maps this to a
// distinct exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data: bad CSV framing, duplicate or empty ids.
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lookup of an unknown partition, task, or entity id.
struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A consistency violation that indicates a bug upstream, e.g. conflicting
// similarities reported for the same entity pair.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Socket or framing failure in multi-process mode.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace parmatch
