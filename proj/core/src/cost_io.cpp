#include "dsq/cost_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dsq/error.hpp"

namespace dsq {
namespace {

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  return out;
}

int to_int(const std::string& key, const std::string& value) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  return out;
}

std::string strip_comment(std::string v) {
  for (char c : {';', '#'}) {
    const auto pos = v.find(c);
    if (pos != std::string::npos) v.erase(pos);
  }
  while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.pop_back();
  return v;
}

void apply_family(UnitCostTable& table, FormatKind kind, const KeyValues& kv, const std::string& section) {
  for (const auto& [key, value] : kv) {
    const std::string where = section + "." + key;
    if (key.rfind("mac.", 0) == 0) {
      const std::string spec = key.substr(4);
      const auto x = spec.find('x');
      if (x == std::string::npos) {
        table.set_diagonal(kind, to_int(where, spec), to_double(where, value));
      } else {
        table.set_pair(kind, to_int(where, spec.substr(0, x)), to_int(where, spec.substr(x + 1)),
                       to_double(where, value));
      }
    } else if (key.rfind("storage.", 0) == 0) {
      table.set_storage(kind, to_int(where, key.substr(8)), to_double(where, value));
    } else {
      throw ConfigError("unknown unit-cost key '" + where + "'");
    }
  }
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

IniSections read_ini(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  IniSections out;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      out[""][name] = strip_comment(node.data());
      continue;
    }
    auto& section = out[name];
    for (const auto& [key, leaf] : node) section[key] = strip_comment(leaf.data());
  }
  return out;
}

IniSections read_ini_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return read_ini(in);
}

UnitCostTable unit_cost_table_from(const IniSections& sections) {
  UnitCostTable table = UnitCostTable::defaults();
  if (auto it = sections.find("table"); it != sections.end()) {
    for (const auto& [key, value] : it->second) {
      if (key != "base") throw ConfigError("unknown unit-cost key 'table." + key + "'");
      if (value == "formula") {
        table = UnitCostTable::formula_only();
      } else if (value != "calibrated") {
        throw ConfigError("table.base must be 'calibrated' or 'formula', got '" + value + "'");
      }
    }
  }
  for (const auto& [section, kv] : sections) {
    if (section == "table") continue;
    if (section == "reference") {
      for (const auto& [key, value] : kv) {
        if (key != "mac") throw ConfigError("unknown unit-cost key 'reference." + key + "'");
        table.set_reference_cost(to_double("reference.mac", value));
      }
    } else if (section == "fixed") {
      apply_family(table, FormatKind::Fixed, kv, section);
    } else if (section == "bfp") {
      apply_family(table, FormatKind::Bfp, kv, section);
    } else {
      throw ConfigError("unknown unit-cost section '[" + section + "]'");
    }
  }
  table.validate();
  return table;
}

UnitCostTable load_unit_cost_table(const std::filesystem::path& path) {
  if (path.empty()) return UnitCostTable::defaults();
  return unit_cost_table_from(read_ini_file(path));
}

std::string format_unit_cost_table(const UnitCostTable& table) {
  std::ostringstream os;
  os << "[table]\nbase = formula\n\n[reference]\nmac = " << fmt_double(table.reference_cost()) << "\n";
  for (FormatKind kind : {FormatKind::Fixed, FormatKind::Bfp}) {
    os << "\n[" << family_name(kind) << "]\n";
    for (const auto& [key, cost] : table.diagonals())
      if (key.first == kind) os << "mac." << key.second << " = " << fmt_double(cost) << "\n";
    for (const auto& [key, cost] : table.pairs())
      if (std::get<0>(key) == kind)
        os << "mac." << std::get<1>(key) << "x" << std::get<2>(key) << " = " << fmt_double(cost) << "\n";
    for (const auto& [key, width] : table.storage_overrides())
      if (key.first == kind) os << "storage." << key.second << " = " << fmt_double(width) << "\n";
  }
  return os.str();
}

TrafficProfile traffic_profile_from(const KeyValues& kv) {
  TrafficProfile p = TrafficProfile::default_profile();
  for (const auto& [key, value] : kv) {
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      if (key.substr(dot + 1) != "width") throw ConfigError("unknown traffic key '" + key + "'");
      p.rule(parse_class(key.substr(0, dot))).width = parse_width_source(value);
      continue;
    }
    auto& rule = p.rule(parse_class(key));
    if (value == "none") {
      rule.read = rule.write = false;
    } else if (value == "read") {
      rule.read = true;
      rule.write = false;
    } else if (value == "write") {
      rule.read = false;
      rule.write = true;
    } else if (value == "both") {
      rule.read = rule.write = true;
    } else {
      throw ConfigError("traffic '" + key + "' must be none, read, write or both; got '" + value + "'");
    }
  }
  p.validate();
  return p;
}

std::string format_traffic_profile(const TrafficProfile& profile) {
  std::ostringstream os;
  os << "[traffic]\n";
  for (auto c : kTensorClasses) {
    const auto& r = profile.rule(c);
    const char* dir = r.read && r.write ? "both" : r.read ? "read" : r.write ? "write" : "none";
    os << class_name(c) << " = " << dir << "\n";
    os << class_name(c) << ".width = " << width_source_name(r.width) << "\n";
  }
  return os.str();
}

}  // namespace dsq
