// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>

namespace vsr {

// File/codec problems (bad magic, truncation, unwritable paths).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline stage was invoked without its prerequisite checkpoint.
struct PrereqError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A verification command (gradient suite, evaluation) found failures.
struct CheckError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace vsr
