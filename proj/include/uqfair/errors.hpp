#pragma once

#include <stdexcept>
#include <string>

namespace uqfair {

// Validation problems: bad manifests, bad tensors, bad arguments. Exit code 1.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / decode problems. Exit code 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace uqfair
