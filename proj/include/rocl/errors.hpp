#pragma once

#include <stdexcept>
#include <string>

namespace rocl {

// Fleet geometry too degenerate to proceed (coincident vehicles on a measured
// edge, collinear layout where a planar embedding is required, ...).
class DegenerateConfigError : public std::runtime_error {
 public:
  explicit DegenerateConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A range triple violates the triangle inequality beyond the allowed slack.
class InconsistentRangesError : public std::runtime_error {
 public:
  explicit InconsistentRangesError(const std::string& what) : std::runtime_error(what) {}
};

// The startup pipeline could not produce a usable fleet state.
class InitializationError : public std::runtime_error {
 public:
  explicit InitializationError(const std::string& what) : std::runtime_error(what) {}
};

// A consumer asked for data the input streams have not delivered.
class StaleInputError : public std::runtime_error {
 public:
  explicit StaleInputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rocl
