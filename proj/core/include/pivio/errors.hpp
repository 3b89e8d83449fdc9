#pragma once

#include <stdexcept>
#include <string>

namespace pivio {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Composition or ominus of transforms with incompatible frame tags.
class FrameError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; message names file, row and column/key.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Point with non-positive depth handed to a projection.
class BehindCameraError : public Error {
 public:
  using Error::Error;
};

// Near-parallel rays, collapsed geometry and the like.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// Iterative routine exceeded its step budget.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

// Sample set does not span enough directions for a fit.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// Fewer correspondences/poses than the estimator needs.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Normal matrix close to singular; message carries the condition number.
class IllConditionedError : public Error {
 public:
  using Error::Error;
};

// Gaps, duplicate timestamps, missing overlap in timestamped streams.
class StreamError : public Error {
 public:
  using Error::Error;
};

// Zero-variance or otherwise unusable residual statistic.
class DegenerateStatisticError : public Error {
 public:
  using Error::Error;
};

// Non-finite cost, failed factorization and the like.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pivio
