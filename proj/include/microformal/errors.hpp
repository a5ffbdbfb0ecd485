#pragma once

#include <stdexcept>
#include <string>

namespace microformal {

// Error taxonomy shared by all modules. The CLI maps kinds to exit codes.
enum class ErrorKind {
  parse,        // malformed input file or schema violation
  shape,        // mismatched variable specs / dimensions
  parity,       // odd/even inconsistency
  domain,       // input outside an operation's domain (e.g. log without unit body)
  convergence,  // iteration failed to contract or to reach tolerance
  singular,     // non-invertible matrix body, caustic, transversality failure
  internal      // broken invariant; indicates a bug, not bad input
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

}  // namespace microformal
