// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "agprune/json_schema.hpp"

namespace agprune {

namespace {

using nlohmann::json;

bool matches_type(const std::string& type, const json& doc) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "boolean") return doc.is_boolean();
  if (type == "number") return doc.is_number();
  if (type == "integer") return doc.is_number_integer();
  if (type == "null") return doc.is_null();
  return false;
}

std::optional<std::string> check(const json& schema, const json& doc, const std::string& path,
                                 const SchemaOptions& options) {
  const std::string where = path.empty() ? "$" : path;
  if (auto it = schema.find("type"); it != schema.end()) {
    const auto type = it->get<std::string>();
    if (!matches_type(type, doc)) {
      return where + ": expected " + type;
    }
  }
  if (doc.is_number() && options.check_numeric_bounds) {
    const double v = doc.get<double>();
    if (auto it = schema.find("minimum"); it != schema.end() && v < it->get<double>()) {
      return where + ": " + doc.dump() + " is below minimum " + it->dump();
    }
    if (auto it = schema.find("maximum"); it != schema.end() && v > it->get<double>()) {
      return where + ": " + doc.dump() + " is above maximum " + it->dump();
    }
  }
  if (doc.is_object()) {
    if (auto it = schema.find("required"); it != schema.end()) {
      for (const auto& key : *it) {
        if (!doc.contains(key.get<std::string>())) {
          return where + ": missing required property '" + key.get<std::string>() + "'";
        }
      }
    }
    const auto props = schema.find("properties");
    const bool closed = schema.value("additionalProperties", true) == false;
    for (const auto& [key, value] : doc.items()) {
      const std::string child = where + "." + key;
      if (props != schema.end() && props->contains(key)) {
        if (auto err = check(props->at(key), value, child, options)) {
          return err;
        }
      } else if (closed) {
        return where + ": unexpected property '" + key + "'";
      }
    }
  }
  if (doc.is_array()) {
    if (auto it = schema.find("items"); it != schema.end()) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        if (auto err = check(*it, doc[i], where + "[" + std::to_string(i) + "]", options)) {
          return err;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> schema_violation(const json& schema, const json& doc,
                                            const SchemaOptions& options) {
  return check(schema, doc, "", options);
}

}  // namespace agprune
