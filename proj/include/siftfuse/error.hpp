#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace siftfuse {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- filesystem / decoding ---
struct IoError : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };
struct CorruptData : Error { using Error::Error; };
struct InvalidDimensions : Error { using Error::Error; };

// --- manifests / annotations ---
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }
private:
    std::size_t line_;
};
struct DuplicateSubject : Error { using Error::Error; };
struct MissingFile : Error { using Error::Error; };
struct InvariantViolation : Error { using Error::Error; };

// --- feature extraction ---
struct ImageTooSmall : Error { using Error::Error; };

// --- matching ---
struct MissingRegion : Error { using Error::Error; };
struct EmptyFeatureSet : Error { using Error::Error; };

// --- score fusion ---
struct DegenerateRange : Error { using Error::Error; };
struct InvalidBelief : Error { using Error::Error; };
struct TotalConflict : Error { using Error::Error; };

// --- evaluation ---
struct DegenerateMatrix : Error { using Error::Error; };
struct ExtractionFailure : Error { using Error::Error; };

// --- configuration ---
struct ConfigError : Error { using Error::Error; };

} // namespace siftfuse
