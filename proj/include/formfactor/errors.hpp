#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace formfactor {

// Base of every error the library throws. `kind()` is a stable machine name
// used by the CLI when it reports failures as JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Input bytes do not follow the expected format; message names the JSON path.
struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error("malformed-input", what) {}
};

// Input is well-formed but breaks a data-model invariant.
struct InvariantError : Error {
  explicit InvariantError(const std::string& what) : Error("invariant-violation", what) {}
};

// Schema validation failure carrying every violation found.
class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<std::string> violations)
      : Error("invalid-schema", join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid schema:";
    for (const auto& s : v) out += " [" + s + "]";
    return out;
  }
  std::vector<std::string> violations_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error("shape-mismatch", what) {}
};

struct CheckpointError : Error {
  CheckpointError(std::string kind, const std::string& what) : Error(std::move(kind), what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error("non-finite", what) {}
};

struct DataError : Error {
  DataError(std::string kind, const std::string& what) : Error(std::move(kind), what) {}
};

}  // namespace formfactor
