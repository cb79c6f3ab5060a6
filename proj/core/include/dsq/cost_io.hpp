#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "dsq/costmodel.hpp"

namespace dsq {

using KeyValues = std::map<std::string, std::string>;
using IniSections = std::map<std::string, KeyValues>;

/// Reads a flat `key = value` file with `[section]` headers. Keys outside
/// any section land in section "". `;` and `#` start comments.
IniSections read_ini(std::istream& in);
IniSections read_ini_file(const std::filesystem::path& path);

/// Unit-cost table file:
///
///   [table]
///   base = calibrated        ; or "formula" to start from the bare formulas
///   [reference]
///   mac = 1.0
///   [bfp]
///   mac.4 = 0.02             ; diagonal cost of bfp:4 x bfp:4
///   mac.4x16 = 0.06          ; explicit mixed pair
///   storage.4 = 8.16         ; bits per stored element
///   [fixed]
///   mac.8 = 0.0625
///
/// Entries overlay the chosen base; the result is validated.
UnitCostTable unit_cost_table_from(const IniSections& sections);
/// An empty path yields UnitCostTable::defaults().
UnitCostTable load_unit_cost_table(const std::filesystem::path& path);
std::string format_unit_cost_table(const UnitCostTable& table);

/// Traffic profile keys (all optional, overlaying the default profile):
///
///   activation = write       ; none | read | write | both
///   activation.width = q0    ; q0..q3 or ref
///   weight = read
///   stash = both
///   act_grad = write
///   weight_grad = none
///   optimizer = none
TrafficProfile traffic_profile_from(const KeyValues& kv);
std::string format_traffic_profile(const TrafficProfile& profile);

}  // namespace dsq
