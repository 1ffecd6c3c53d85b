#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pathnet {

/// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bad user-supplied value (out-of-range label, invalid config field).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation requires state that is not present (e.g. missing task head).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed file contents; carries the byte offset of the problem.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}
    std::size_t byte_offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Missing or unusable data files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pathnet
