#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trajlab {

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
   public:
    using Error::Error;
};

/// Attention mask is malformed (wrong extents or a query row with no allowed key).
class MaskError : public Error {
   public:
    using Error::Error;
};

/// Invalid hyperparameters or run configuration.
class ConfigError : public Error {
   public:
    using Error::Error;
};

/// Input data is unusable (degenerate statistics, missing files, bad caches).
class DataError : public Error {
   public:
    using Error::Error;
};

/// Raised by the text trajectory reader. Carries the 1-based line and field.
class ParseError : public DataError {
   public:
    ParseError(std::string file, std::size_t line, std::size_t field, const std::string& reason)
        : DataError(file + ":" + std::to_string(line) + ": field " + std::to_string(field) + ": " +
                    reason),
          file_(std::move(file)),
          line_(line),
          field_(field) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t field() const noexcept { return field_; }

   private:
    std::string file_;
    std::size_t line_;
    std::size_t field_;
};

/// Clustering could not be performed on the given points.
class FitError : public DataError {
   public:
    using DataError::DataError;
};

/// Codebook index out of range.
class LookupError : public Error {
   public:
    using Error::Error;
};

/// Non-finite logits or invalid temperature during sampling.
class SamplingError : public Error {
   public:
    using Error::Error;
};

/// Numeric failure during optimisation (non-finite loss or gradient).
class TrainingError : public Error {
   public:
    using Error::Error;
};

/// Model invoked with an input layout or decoding mode it does not support.
class ModelError : public Error {
   public:
    using Error::Error;
};

}  // namespace trajlab
