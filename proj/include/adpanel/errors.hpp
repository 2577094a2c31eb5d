#pragma once

#include <stdexcept>
#include <string>

namespace adpanel {

// Invalid settings: bad dictionary spec, fold count, empty grids, unknown keys.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside an optimizer (unbounded objective, no candidate converged).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace adpanel
