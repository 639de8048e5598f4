#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnrf {

static_assert(std::endian::native == std::endian::little,
              "pnrf file formats assume a little-endian host");

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

inline void check_arg(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

inline int64_t numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

template <class S>
bool all_finite(const std::vector<S>& v) {
  for (S x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace pnrf
