// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace agprune {

struct SchemaOptions {
  bool check_numeric_bounds = true;
};

/// Checks a document against the JSON-schema subset used by the agent
/// contract: type, properties, required, additionalProperties (boolean),
/// items, minimum, maximum. Returns the first violation as "path: reason".
std::optional<std::string> schema_violation(const nlohmann::json& schema,
                                            const nlohmann::json& doc,
                                            const SchemaOptions& options = {});

}  // namespace agprune
