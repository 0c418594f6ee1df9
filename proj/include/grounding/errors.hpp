#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grounding {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed scene input: JSON syntax errors, schema violations, or
/// invariant violations (duplicate ids, bad rotations, out-of-range indices).
class SceneError : public Error {
 public:
  using Error::Error;
};

/// Query text could not be converted into clauses.
class ParseError : public Error {
 public:
  enum class Kind {
    NoPredicateFound,
    AmbiguousMetricBinding,
    MissingAnchor,
    MetricOutOfRange,
    BadNumber,
  };

  ParseError(Kind kind, const std::string& what, std::size_t begin = 0, std::size_t end = 0)
      : Error(what), kind_(kind), begin_(begin), end_(end) {}

  Kind kind() const { return kind_; }
  std::size_t span_begin() const { return begin_; }
  std::size_t span_end() const { return end_; }

 private:
  Kind kind_;
  std::size_t begin_;
  std::size_t end_;
};

/// Anchor resolution failures (e.g. resolving against an empty scene graph).
class ResolveError : public Error {
 public:
  using Error::Error;
};

/// Kernel construction failures.
class KernelError : public Error {
 public:
  enum class Kind { MissingSecondAnchor, MissingObserver, BadParameter };

  KernelError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Density field construction/normalization failures.
class DensityError : public Error {
 public:
  enum class Kind { EmptyFreeSpace, AllMasked, ZeroOffset, NotNormalized, BadArgument };

  DensityError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Planner failures.
class PlannerError : public Error {
 public:
  enum class Kind { NoPathFound, StartOccupied, GoalOccupied, BadSlice, BadParameter };

  PlannerError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Pipeline orchestration failures that are not covered by stage errors.
class PipelineError : public Error {
 public:
  enum class Kind { RetryLimitExceeded, DuplicateId, NoCandidates };

  PipelineError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Configuration file problems.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Benchmark dataset problems.
class BenchError : public Error {
 public:
  using Error::Error;
};

}  // namespace grounding
