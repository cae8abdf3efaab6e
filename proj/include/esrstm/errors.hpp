#pragma once

#include <stdexcept>
#include <string>

namespace esrstm {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid input values or violated preconditions (bad config, reversed
/// ranges, non-finite arguments, malformed files).
struct DomainError : Error {
    using Error::Error;
};

/// The data does not support the requested analysis (no step in a trace,
/// too few usable fields, degenerate design matrix).
struct AnalysisError : Error {
    using Error::Error;
};

/// An iterative numeric procedure failed to converge within its bounds.
struct NumericError : Error {
    using Error::Error;
};

/// Filesystem or stream failure.
struct IoError : Error {
    using Error::Error;
};

/// Readable file with malformed content (bad CSV row, unknown config key);
/// messages name the offending line.
struct FormatError : IoError {
    using IoError::IoError;
};

} // namespace esrstm
