#pragma once

#include <stdexcept>
#include <string>

namespace lingo {

// Shape rule of a primitive violated; message names the primitive and dims.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidAxisError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct StaleTapeError : std::logic_error {
  using std::logic_error::logic_error;
};

struct UninitializedGradientError : std::logic_error {
  using std::logic_error::logic_error;
};

// A caller broke an operation's precondition.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VocabularyError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lingo
