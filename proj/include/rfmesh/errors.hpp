#pragma once

// Error taxonomy used for CLI exit codes: bad user input (missing files,
// malformed configs, invalid values) exits 1; internal failures (numerical
// blowup, broken invariants, I/O faults mid-run) exit 2.

#include <stdexcept>
#include <string>

namespace rfmesh {

struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RuntimeFailure : std::runtime_error {
    explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rfmesh
