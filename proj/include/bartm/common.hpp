#pragma once

#include <stdexcept>
#include <string>

namespace bartm {

// Thrown for user-facing failures: bad files, schema mismatches, invalid
// configuration. Internal invariant violations use std::logic_error.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

}  // namespace bartm
