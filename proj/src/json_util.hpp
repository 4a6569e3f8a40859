#pragma once

// Path-tracking accessors over nlohmann::json used by the document loaders.

#include "cin/config_error.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cin {

class JsonReader {
 public:
  JsonReader(const nlohmann::json& node, std::string path)
      : node_(&node), path_(std::move(path)) {
    if (!node_->is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string child_path(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return node_->contains(key); }
  const nlohmann::json& raw(const std::string& key) const { return require(key); }

  double number(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_number()) throw ConfigError(child_path(key), "expected a number");
    return v.get<double>();
  }
  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  double positive(const std::string& key, double fallback) const {
    const double v = number_or(key, fallback);
    if (!(v > 0.0)) throw ConfigError(child_path(key), "must be positive");
    return v;
  }
  double non_negative(const std::string& key, double fallback) const {
    const double v = number_or(key, fallback);
    if (!(v >= 0.0)) throw ConfigError(child_path(key), "must be non-negative");
    return v;
  }
  std::int64_t integer(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_number_integer()) throw ConfigError(child_path(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = require(key);
    if (!v.is_number_unsigned()) throw ConfigError(child_path(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::string string(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_string()) throw ConfigError(child_path(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }
  bool boolean_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = require(key);
    if (!v.is_boolean()) throw ConfigError(child_path(key), "expected a boolean");
    return v.get<bool>();
  }
  Eigen::Vector2d vector2(const std::string& key) const { return fixed<2>(key); }
  Eigen::Vector3d vector3(const std::string& key) const { return fixed<3>(key); }

  JsonReader object(const std::string& key) const { return JsonReader(require(key), child_path(key)); }
  std::optional<JsonReader> optional_object(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return object(key);
  }
  std::vector<JsonReader> objects(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_array()) throw ConfigError(child_path(key), "expected an array");
    std::vector<JsonReader> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.emplace_back(v[i], child_path(key) + "/" + std::to_string(i));
    }
    return out;
  }

 private:
  const nlohmann::json& require(const std::string& key) const {
    if (!node_->contains(key)) throw ConfigError(child_path(key), "missing required field");
    return node_->at(key);
  }

  template <int N>
  Eigen::Matrix<double, N, 1> fixed(const std::string& key) const {
    const auto& v = require(key);
    if (!v.is_array() || v.size() != N) {
      throw ConfigError(child_path(key), "expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!v[i].is_number()) {
        throw ConfigError(child_path(key) + "/" + std::to_string(i), "expected a number");
      }
      out(i) = v[i].get<double>();
    }
    return out;
  }

  const nlohmann::json* node_;
  std::string path_;
};

/// Reads and parses a JSON file; syntax errors are reported as file:line:column.
nlohmann::json parse_json_file(const std::string& path);

}  // namespace cin
