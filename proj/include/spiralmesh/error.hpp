#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spiralmesh {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input. line() is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Non-manifold or otherwise unusable connectivity around a vertex.
class TopologyError : public Error {
 public:
  TopologyError(int vertex, const std::string& what)
      : Error("vertex " + std::to_string(vertex) + ": " + what), vertex_(vertex) {}
  int vertex() const { return vertex_; }

 private:
  int vertex_;
};

class StaleTableError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DecimationError : public Error {
 public:
  DecimationError(int achieved, int target)
      : Error("decimation stalled at " + std::to_string(achieved) +
              " vertices (target " + std::to_string(target) + ")"),
        achieved_(achieved) {}
  int achieved() const { return achieved_; }

 private:
  int achieved_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration; field() is a JSON-pointer-like path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class NumericError : public Error {
 public:
  explicit NumericError(int epoch)
      : Error("non-finite loss in epoch " + std::to_string(epoch)), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace spiralmesh
