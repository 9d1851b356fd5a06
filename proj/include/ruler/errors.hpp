#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ruler {

// Root of the library's exception hierarchy. Everything thrown on purpose
// derives from this so callers can catch one type at the orchestration layer.
struct RulerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- embedding / geometry ----

struct DimMismatch : RulerError {
    using RulerError::RulerError;
};

struct NotNormalized : RulerError {
    using RulerError::RulerError;
};

struct IndexOutOfRange : RulerError {
    using RulerError::RulerError;
};

struct ZeroNormRow : RulerError {
    explicit ZeroNormRow(std::size_t row)
        : RulerError("zero-norm embedding row " + std::to_string(row)), row_index(row) {}
    std::size_t row_index;
};

// ---- data pipeline ----

struct ParseError : RulerError {
    ParseError(std::size_t row, std::size_t col, const std::string& what_)
        : RulerError("parse error at row " + std::to_string(row) + ", column " +
                     std::to_string(col) + ": " + what_),
          row(row), col(col) {}
    std::size_t row;
    std::size_t col;
};

struct NonBinaryLabel : RulerError {
    using RulerError::RulerError;
};

struct DegenerateClass : RulerError {
    using RulerError::RulerError;
};

struct RetainTooSmall : RulerError {
    using RulerError::RulerError;
};

struct DatasetTooSmall : RulerError {
    using RulerError::RulerError;
};

struct PartitionInvalid : RulerError {
    using RulerError::RulerError;
};

// ---- metric preconditions ----

struct EmptyForgetSet : RulerError {
    using RulerError::RulerError;
};

struct EmptyRetainSet : RulerError {
    using RulerError::RulerError;
};

struct UnpairedSeeds : RulerError {
    using RulerError::RulerError;
};

struct MissingModel : RulerError {
    using RulerError::RulerError;
};

struct EmptyPopulation : RulerError {
    using RulerError::RulerError;
};

// ---- statistics ----

struct AllZeroDifferences : RulerError {
    using RulerError::RulerError;
};

struct LengthMismatch : RulerError {
    using RulerError::RulerError;
};

struct TooFewGroups : RulerError {
    using RulerError::RulerError;
};

struct NonFiniteInput : RulerError {
    using RulerError::RulerError;
};

struct OutOfRange : RulerError {
    using RulerError::RulerError;
};

// ---- training ----

struct NonFiniteLoss : RulerError {
    using RulerError::RulerError;
};

struct WrongStartingModel : RulerError {
    using RulerError::RulerError;
};

// ---- I/O / configuration ----

struct FileFormatError : RulerError {
    using RulerError::RulerError;
};

struct ConfigError : RulerError {
    using RulerError::RulerError;
};

}  // namespace ruler
