#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace scendbg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lexical or grammatical error in a scenario program, with 1-based position.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, int line, int column)
      : Error("syntax error at " + std::to_string(line) + ":" + std::to_string(column) + ": " +
              message),
        line(line),
        column(column) {}
  int line;
  int column;
};

/// Well-formed program that violates a static rule (unknown identifier,
/// type mismatch, missing ego, duplicate name, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A single sample exceeded its rejection budget; the program is
/// (near-)unsatisfiable under its `require` constraints.
class RejectionExhausted : public Error {
 public:
  RejectionExhausted(std::int64_t sample_index, int attempts)
      : Error("sample " + std::to_string(sample_index) + " rejected " + std::to_string(attempts) +
              " times; program constraints are (near-)unsatisfiable"),
        sample_index(sample_index),
        attempts(attempts) {}
  std::int64_t sample_index;
  int attempts;
};

class UnknownFeature : public Error {
 public:
  explicit UnknownFeature(const std::string& feature)
      : Error("unknown feature: " + feature), feature(feature) {}
  std::string feature;
};

class UnknownObject : public Error {
 public:
  explicit UnknownObject(const std::string& name)
      : Error("unknown object: " + name), name(name) {}
  std::string name;
};

/// Malformed record in an external data file.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::int64_t record_index)
      : Error("record " + std::to_string(record_index) + ": " + message),
        record_index(record_index) {}
  std::int64_t record_index;
};

class MissingSample : public Error {
 public:
  explicit MissingSample(std::int64_t seed_index)
      : Error("no detector output for sample " + std::to_string(seed_index)),
        seed_index(seed_index) {}
  std::int64_t seed_index;
};

class EmptyData : public Error {
 public:
  using Error::Error;
};

class EmptyRuleSet : public Error {
 public:
  using Error::Error;
};

class SurrogateDisagrees : public Error {
 public:
  using Error::Error;
};

class UnspliceableFeature : public Error {
 public:
  explicit UnspliceableFeature(const std::string& feature)
      : Error("rule feature cannot be expressed as a program constraint: " + feature),
        feature(feature) {}
  std::string feature;
};

class NoActivations : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An extraction method cannot run (e.g. white-box requested without
/// activations).
class MethodError : public Error {
 public:
  using Error::Error;
};

}  // namespace scendbg
