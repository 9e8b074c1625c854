#pragma once

#include "fbsde/conditions.hpp"
#include "fbsde/core.hpp"
#include "fbsde/global_solver.hpp"
#include "fbsde/oracles.hpp"
#include "fbsde/small_time.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace fbsde {

using json = nlohmann::ordered_json;

/// {x_lo, x_hi, dx, n, values} with n the node count and one row of
/// components per node.
json to_json(const GridFunction& gf);
GridFunction grid_function_from_json(const json& j);

json to_json(const ConditionReport& report);
json to_json(const SufficientReport& report);
json to_json(const SegmentSolution& seg);
/// Partition, per-segment summaries, Lipschitz table, fitted C_K and g_0.
json to_json(const GlobalSolution& sol);
json to_json(const ConditionProfile& profile);
json registry_listing();

/// Columns t, path_id, X, Y_1..Y_n, Z_11..Z_nd.
void write_paths_csv(std::ostream& out, const PathBundle& bundle);

/// Shortest round-trip decimal form used in every CSV cell.
std::string format_double(double v);

/// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace fbsde
