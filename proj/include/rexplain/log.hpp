#pragma once

#include <iostream>
#include <mutex>
#include <string>

namespace rexplain {

namespace detail {
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline void log_warn(const std::string& msg) {
  std::scoped_lock lock(detail::log_mutex());
  std::cerr << "[warn] " << msg << '\n';
}

inline void log_info(const std::string& msg) {
  std::scoped_lock lock(detail::log_mutex());
  std::cerr << "[info] " << msg << '\n';
}

}  // namespace rexplain
