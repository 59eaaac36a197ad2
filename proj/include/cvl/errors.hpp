#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cvl {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pixel ray at or above the horizon: no intersection with the ground plane.
class HorizonError : public Error {
 public:
  using Error::Error;
};

// Malformed pyramid file. offset() is the byte position of the bad field.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class EmptyRegion : public Error {
 public:
  using Error::Error;
};

class NotVisible : public Error {
 public:
  using Error::Error;
};

class DegenerateSystem : public Error {
 public:
  DegenerateSystem(const std::string& what, int active)
      : Error(what), active_(active) {}
  int active_count() const noexcept { return active_; }

 private:
  int active_;
};

class SingularHessian : public Error {
 public:
  SingularHessian(const std::string& what, double condition)
      : Error(what + " (condition estimate " + std::to_string(condition) + ")"),
        condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

// Invalid rig, scene or metadata configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cvl
