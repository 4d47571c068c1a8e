#pragma once

#include <stdexcept>
#include <string>

namespace patchcast {

// Shape/dimension disagreement between tensors or model pieces.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent configuration (bad key, bad value, L < P, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File parse/read/write problems.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime failures during optimization (NaN loss, degenerate objective, ...).
struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace patchcast
