#pragma once
#include <functional>
#include <optional>

#include "coronalab/core.hpp"

namespace coronalab::testing {

// Error code raised by f, or nullopt when f returns normally.
inline std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace coronalab::testing
