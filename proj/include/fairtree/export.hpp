#pragma once
// Deterministic renderings of an InstabilityTree.

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "fairtree/tree.hpp"

namespace fairtree {

enum class ExportFormat { Json, Dot, Text };

ExportFormat parse_export_format(std::string_view s);

inline constexpr int kTreeSchemaVersion = 1;

nlohmann::ordered_json tree_to_json(const InstabilityTree& tree);
/// Inverse of tree_to_json. Throws std::invalid_argument on schema mismatch.
InstabilityTree tree_from_json(const nlohmann::json& j);

std::string export_tree(const InstabilityTree& tree, ExportFormat format);

}  // namespace fairtree
