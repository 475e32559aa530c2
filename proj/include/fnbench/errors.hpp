#pragma once

#include <stdexcept>
#include <string>

namespace fnbench {

/// File or OS level failure (missing file, unwritable path, bad CLI usage).
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Operands with incompatible dimensions.
struct shape_error : std::invalid_argument {
    explicit shape_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Data that parses but violates a documented invariant.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where finite ones are required.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fnbench
