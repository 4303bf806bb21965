#pragma once

#include <stdexcept>

namespace ccm {

// Input-contract violations (bad files, bad flags, mismatched shapes).
// The CLI maps these to exit code 1; everything else to 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ccm
