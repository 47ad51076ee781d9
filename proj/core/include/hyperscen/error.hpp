#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperscen {

enum class ErrorCode {
    MalformedXml,
    MissingField,
    InvalidValue,
    MalformedCsv,
    NonMonotonicTimestamp,
    OutOfRangeValue,
    EmptyTrace,
    InvalidParams,
    BelowMinimum,
    CalibrationOutOfRange,
    DegenerateSamples,
    ZeroAllocation,
    LengthMismatch,
    EmptyFeasibleSet,
    NoFeasibleAssignment,
    TooLarge,
    ZeroTotalDemand,
    TooFewRecords,
    FeatureMismatch,
    InvalidSpec,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for every library failure. `row` and `column` are
// filled in by the parsers so callers (CLI, HTTP) can point at the input.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::optional<std::size_t> row = std::nullopt,
          std::string column = {});

    ErrorCode code() const noexcept { return code_; }
    const std::optional<std::size_t>& row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> row_;
    std::string column_;
};

}  // namespace hyperscen
