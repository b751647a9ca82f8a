#pragma once

#include <stdexcept>
#include <string>

namespace gnnseg {

// Error categories aligned with the CLI exit codes:
// validation -> 2, I/O -> 3, numerical -> 4.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gnnseg
