#pragma once

#include <stdexcept>
#include <string>

namespace sardino {

/// Shapes or layer specs do not line up.
struct SpecMismatch : std::runtime_error {
  explicit SpecMismatch(const std::string& what) : std::runtime_error(what) {}
};

/// Class index outside [0, classes).
struct BadLabel : std::runtime_error {
  explicit BadLabel(const std::string& what) : std::runtime_error(what) {}
};

struct BadArgument : std::runtime_error {
  explicit BadArgument(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed dataset or model file.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

struct BadTelemetry : std::runtime_error {
  explicit BadTelemetry(const std::string& what) : std::runtime_error(what) {}
};

/// Detection alone already consumed the frame period.
struct NoBudget : std::runtime_error {
  explicit NoBudget(const std::string& what) : std::runtime_error(what) {}
};

struct BadConfig : std::runtime_error {
  explicit BadConfig(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sardino
