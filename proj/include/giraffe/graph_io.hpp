#pragma once

#include <string>

#include "giraffe/graph.hpp"
#include "json.hpp"

namespace giraffe {

inline constexpr int kGraphSchemaVersion = 1;

/// Schema-v1 document:
///   {name, schema_version, nodes:[{id, level, layer, role, label, op:{kind,...}, shape?}],
///    edges:[{src, dst, transform}], inputs:[], outputs:[], metadata:{}}
/// `level`/`layer` are null for anonymous backbone stages. A transform is the
/// string "identity" | "upsample2" | "downsample2" or {"project": channels}.
nlohmann::json to_json(const ArchitectureGraph& g);

/// Throws a validation Error whose message starts with the JSON path of the
/// offending element, e.g. "$.nodes[3].op.kind: unknown op kind 'deconv'".
ArchitectureGraph from_json(const nlohmann::json& doc);

std::string serialize(const ArchitectureGraph& g, int indent = 2);
ArchitectureGraph deserialize(const std::string& text);

/// Graphviz rendering. Neck nodes are labeled "P{k}^{l}"; edge styles encode
/// the transform (identity solid, upsample dashed blue, downsample dotted red,
/// project bold green).
std::string to_dot(const ArchitectureGraph& g);

}  // namespace giraffe
