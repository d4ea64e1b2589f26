#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apnav {

/// Invalid shapes or dimensions (grids, networks, observation lengths).
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Grid index outside the grid.
class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// A file or document does not match its schema. Carries the 1-based line
/// number when the failure can be pinned to one (0 otherwise).
class SchemaError : public std::runtime_error {
public:
    SchemaError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what)
        , line_(line)
    {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyDatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every grid pose already meets the threshold; there is nothing to sample.
class NoValidPoseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace apnav
