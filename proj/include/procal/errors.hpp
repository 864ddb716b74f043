#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace procal {

// Invalid user-supplied data or configuration. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A broken internal invariant. The CLI maps these to exit code 3.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class NonFiniteError : public InputError {
public:
    explicit NonFiniteError(const std::string& where)
        : InputError("non-finite value in " + where) {}
};

class NegativeEntryError : public InputError {
public:
    NegativeEntryError(std::size_t index, double value)
        : InputError("negative entry at index " + std::to_string(index) + ": " +
                     std::to_string(value)) {}
};

class ZeroSumError : public InputError {
public:
    ZeroSumError() : InputError("probability entries sum to zero") {}
};

class DimensionMismatchError : public InputError {
public:
    explicit DimensionMismatchError(const std::string& detail)
        : InputError("dimension mismatch: " + detail) {}
};

class LabelOutOfRangeError : public InputError {
public:
    LabelOutOfRangeError(std::size_t row, long label, int class_count)
        : InputError("label " + std::to_string(label) + " out of range [0, " +
                     std::to_string(class_count) + ") at row " + std::to_string(row)) {}
};

class ParseError : public InputError {
public:
    ParseError(std::size_t row, const std::string& reason)
        : InputError("parse error at row " + std::to_string(row) + ": " + reason),
          row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class BandwidthNonPositiveError : public InputError {
public:
    explicit BandwidthNonPositiveError(double h)
        : InputError("kernel bandwidth must be positive, got " + std::to_string(h)) {}
};

class EmptyGridError : public InputError {
public:
    EmptyGridError() : InputError("bandwidth grid is empty") {}
};

class GeneratorValidationError : public InputError {
public:
    explicit GeneratorValidationError(const std::string& detail)
        : InputError("convex generator rejected: " + detail) {}
};

}  // namespace procal
