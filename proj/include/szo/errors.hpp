#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace szo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector or matrix sizes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the operation's domain (mu <= 0, empty split, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed file: IDX, checkpoint, config.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Objective produced a non-finite value. Carries the offending point.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::vector<double> point)
      : Error(what), point_(std::move(point)) {}

  const std::vector<double>& point() const { return point_; }

 private:
  std::vector<double> point_;
};

}  // namespace szo
