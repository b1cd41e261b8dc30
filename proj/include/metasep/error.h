// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_ERROR_H_
#define METASEP_ERROR_H_

#include <sstream>
#include <stdexcept>
#include <utility>
#include <string>

namespace metasep {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

template <typename First, typename... Rest>
[[noreturn]] void fail(First&& first, Rest&&... rest) {
  throw Error(concat(std::forward<First>(first), std::forward<Rest>(rest)...));
}

}  // namespace metasep

// Precondition check; the message should name the offending values.
#define MS_CHECK(cond, ...)                                   \
  do {                                                        \
    if (!(cond)) ::metasep::fail(::metasep::concat(__VA_ARGS__)); \
  } while (0)

#endif  // METASEP_ERROR_H_
