// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace voxgen {

/// Broad failure classes. The CLI maps each one to its own exit code.
enum class ErrorKind {
  InvalidArgument,
  OutOfBounds,
  Config,
  Parse,
  Format,
  Io,
  Divergence,
  TrainingFailure,
  RefinementFailure,
  Generation,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::InvalidArgument, what) {}
};

class OutOfBoundsError : public Error {
 public:
  OutOfBoundsError(std::size_t atom_index, const std::string& what)
      : Error(ErrorKind::OutOfBounds, what), atom_index_(atom_index) {}
  std::size_t atom_index() const noexcept { return atom_index_; }

 private:
  std::size_t atom_index_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::Format, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

/// A Langevin chain produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(long chain, long step, const std::string& what)
      : Error(ErrorKind::Divergence, what), chain_(chain), step_(step) {}
  long chain() const noexcept { return chain_; }
  long step() const noexcept { return step_; }

 private:
  long chain_;
  long step_;
};

class TrainingFailure : public Error {
 public:
  TrainingFailure(long step, const std::string& what)
      : Error(ErrorKind::TrainingFailure, what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class RefinementFailure : public Error {
 public:
  RefinementFailure(std::size_t peak, const std::string& what)
      : Error(ErrorKind::RefinementFailure, what), peak_(peak) {}
  std::size_t peak() const noexcept { return peak_; }

 private:
  std::size_t peak_;
};

class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& what)
      : Error(ErrorKind::Generation, what) {}
};

}  // namespace voxgen
