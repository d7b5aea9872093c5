#pragma once

#include <stdexcept>
#include <string>

namespace pcz {

// Error classes surfaced by the library. The CLI maps each kind to its own
// exit code, so keep the numbering stable.
enum class ErrorKind : int {
  Structural = 1,   // malformed circuit / no consistent vtree
  Contract = 2,     // precondition violated by the caller
  Numerical = 3,    // non-finite or zero-probability intermediate
  Precision = 4,    // alphabet does not fit the coder precision
  Unencodable = 5,  // symbol with zero frequency
  Format = 6,       // file does not parse
  Checksum = 7,     // checksum or model mismatch
  Io = 8,           // unreadable / unwritable file
  Decode = 9,       // corrupted codeword
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace pcz
