#pragma once

// Field-checked JSON reads; every error names the offending field.

#include <cstdint>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "maglab/errors.hpp"

namespace maglab::detail {

inline void require_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
}

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

template <class T>
T convert_field(const nlohmann::json& v, const std::string& name) {
  auto fail = [&](const char* what) { throw ConfigError("field '" + name + "' must be " + what); };
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) fail("a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) fail("a nonnegative integer");
    return v.get<std::uint64_t>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) fail("an integer");
    return v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) fail("a number");
    return v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) fail("a string");
    return v.get<std::string>();
  } else {
    if (!v.is_array()) fail("an array");
    T out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(convert_field<typename T::value_type>(v[i], name + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
}

// Leaves `out` untouched when the key is absent.
template <class T>
void read_field(const nlohmann::json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  out = convert_field<T>(j.at(key), where.empty() ? std::string(key) : where + "." + key);
}

template <class T>
void require_field(const nlohmann::json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) throw ConfigError("missing field '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
  read_field(j, key, where, out);
}

}  // namespace maglab::detail
