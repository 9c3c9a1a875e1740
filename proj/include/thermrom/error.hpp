#pragma once

#include <stdexcept>
#include <string>

namespace thermrom {

// Bad user input: malformed files, inconsistent geometry, out-of-range knobs.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Solver-level failure: CG stagnation, non-SPD assembly, singular reduced system.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace thermrom
