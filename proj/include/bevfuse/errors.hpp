#pragma once

#include <stdexcept>
#include <string>

namespace bevfuse {

// Base for everything thrown by this library, so callers can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data or arguments: maps to CLI exit code 1.
struct ValidationError : Error {
  using Error::Error;
};

// Filesystem / OS level failure: maps to CLI exit code 2.
struct IoError : Error {
  using Error::Error;
};

// A point with non-positive depth cannot be projected.
struct BehindCamera : ValidationError {
  using ValidationError::ValidationError;
};

// Unprojection needs depth > 0.
struct NonPositiveDepth : ValidationError {
  using ValidationError::ValidationError;
};

// Sweep accumulation over an empty window is undefined.
struct EmptyWindow : ValidationError {
  using ValidationError::ValidationError;
};

// Grids that should share extent / cell size / shape do not.
struct MismatchedGrids : ValidationError {
  using ValidationError::ValidationError;
};

// Resampling needs dimensions divisible by the pooling factor.
struct IndivisibleShape : ValidationError {
  using ValidationError::ValidationError;
};

// Channel count does not match what the operation requires.
struct ChannelMismatch : ValidationError {
  using ValidationError::ValidationError;
};

// Two grids entering a fusion stage disagree after alignment.
struct SpecMismatch : ValidationError {
  using ValidationError::ValidationError;
};

// Tensor dimensions disagree with the declared layout.
struct ShapeMismatch : ValidationError {
  using ValidationError::ValidationError;
};

// Loss over zero samples is undefined.
struct EmptyBatch : ValidationError {
  using ValidationError::ValidationError;
};

// Prediction and ground-truth maps must cover the same scene keys.
struct SceneKeyMismatch : ValidationError {
  using ValidationError::ValidationError;
};

// Malformed input file; `where` is a JSON-pointer-like path to the bad node.
struct SchemaError : ValidationError {
  SchemaError(const std::string& where, const std::string& what)
      : ValidationError(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

}  // namespace bevfuse
