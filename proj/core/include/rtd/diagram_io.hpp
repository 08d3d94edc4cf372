#pragma once

#include <string>
#include <vector>

#include "rtd/model.hpp"

namespace rtd {

// Diagram files are JSON objects:
//
//   { "sign": "maximize" | "minimize",
//     "variables": [ { "name": "C", "domain": ["c0", "c1"], "kind": "chance" | "decision" } ],
//     "cpts": [ { "child": "C", "parents": ["X"], "table": [ ... ] } ],
//     "decisions": [ { "variable": "D", "observes": ["X"] } ],
//     "utilities": [ { "scope": ["C", "D"], "table": [ ... ] } ] }
//
// Tables are row-major over (parents..., child) for cpts and over scope for
// utilities, last variable fastest.  Decisions are listed in temporal order.
// Numbers are written in shortest round-trip form, so save/load is lossless.

InfluenceDiagram parse_diagram(const std::string& text);
std::string format_diagram(const InfluenceDiagram& d);

/// Throws ConfigError naming the offending field on malformed input or when
/// the diagram fails validation.
InfluenceDiagram load_diagram(const std::string& path);
void save_diagram(const InfluenceDiagram& d, const std::string& path);

/// Writes to `path` via a temporary sibling and a rename.
void write_file_atomic(const std::string& path, const std::string& content);

/// Resolves `name=label` against the diagram's variables and domains.
Evidence parse_evidence(const InfluenceDiagram& d, const std::vector<std::string>& pairs);

}  // namespace rtd
