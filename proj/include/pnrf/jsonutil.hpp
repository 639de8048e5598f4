#pragma once

#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "pnrf/geometry.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

using nlohmann::json;

inline json load_json(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), cat("cannot open json file: ", path));
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(cat(path, ": ", e.what()));
  }
}

// Configs are schema-checked: any key outside the allowed set is an error,
// so typos fail loudly instead of silently using defaults.
inline void expect_keys(const json& j, const std::string& where,
                        std::initializer_list<const char*> allowed) {
  check_arg(j.is_object(), cat(where, ": expected an object"));
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw std::invalid_argument(cat(where, ": unknown key \"", key, "\""));
  }
}

inline Vec3 vec3_from_json(const json& j, const std::string& where) {
  check_arg(j.is_array() && j.size() == 3, cat(where, ": expected an array of 3 numbers"));
  return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace pnrf
