#ifndef RICCI_JSON_UTIL_HPP
#define RICCI_JSON_UTIL_HPP

#include "ricci/io.hpp"

#include <cmath>
#include <set>
#include <string>
#include <vector>

namespace ricci::detail {

inline void require_object(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw ConfigError(where + "." + key + ": unknown key");
}

inline double get_number(const Json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + "." + key + ": missing");
    if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return j.at(key).get<double>();
}

inline double get_number_or(const Json& j, const std::string& key, const std::string& where, double fallback) {
    return j.contains(key) ? get_number(j, key, where) : fallback;
}

inline int get_int(const Json& j, const std::string& key, const std::string& where) {
    const double v = get_number(j, key, where);
    if (v != std::floor(v) || std::abs(v) > 2e9) throw ConfigError(where + "." + key + ": expected an integer");
    return static_cast<int>(v);
}

inline std::vector<double> get_numbers(const Json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + "." + key + ": missing");
    const Json& a = j.at(key);
    if (!a.is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace ricci::detail

#endif
