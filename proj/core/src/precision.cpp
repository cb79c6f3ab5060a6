#include "dsq/precision.hpp"

#include <algorithm>
#include <charconv>
#include <vector>

#include "dsq/error.hpp"

namespace dsq {
namespace {

std::vector<std::string> split_fields(std::string_view text) {
  std::string cleaned;
  for (char c : text)
    if (c != '[' && c != ']' && c != ' ' && c != '\t') cleaned += c;
  std::vector<std::string> out;
  std::string cur;
  for (char c : cleaned) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

NumberFormat make(FormatKind family, int bits) {
  switch (family) {
    case FormatKind::Reference: return NumberFormat::reference();
    case FormatKind::Fixed: return NumberFormat::fixed(bits);
    case FormatKind::Bfp: return NumberFormat::bfp(bits);
  }
  return NumberFormat::reference();
}

}  // namespace

PrecisionConfig PrecisionConfig::of(FormatKind family, int b0, int b1, int b2, int b3) {
  return {make(family, b0), make(family, b1), make(family, b2), make(family, b3)};
}

PrecisionConfig PrecisionConfig::parse(std::string_view text, FormatKind family) {
  const auto fields = split_fields(text);
  if (fields.size() != 4)
    throw ConfigError("precision setup needs four entries, got '" + std::string(text) + "'");
  NumberFormat f[4];
  for (int i = 0; i < 4; ++i) {
    const auto& tok = fields[static_cast<std::size_t>(i)];
    const bool bare = !tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (bare) {
      int bits = 0;
      std::from_chars(tok.data(), tok.data() + tok.size(), bits);
      f[i] = make(family, bits);
    } else {
      f[i] = NumberFormat::parse(tok);
    }
  }
  PrecisionConfig cfg{f[0], f[1], f[2], f[3]};
  validate(cfg);
  return cfg;
}

const NumberFormat& PrecisionConfig::operator[](int i) const {
  switch (i) {
    case 0: return q0;
    case 1: return q1;
    case 2: return q2;
    case 3: return q3;
  }
  throw ContractViolation("quantization point index must be 0..3");
}

std::string PrecisionConfig::setup_string() const {
  std::string s = "[";
  for (int i = 0; i < 4; ++i) {
    if (i) s += ", ";
    s += std::to_string((*this)[i].bits());
  }
  return s + "]";
}

std::string PrecisionConfig::to_string() const {
  return q0.to_string() + "," + q1.to_string() + "," + q2.to_string() + "," + q3.to_string();
}

FormatKind PrecisionConfig::family() const {
  for (int i = 0; i < 4; ++i)
    if ((*this)[i].kind != FormatKind::Reference) return (*this)[i].kind;
  return FormatKind::Reference;
}

void validate(const PrecisionConfig& cfg) {
  const FormatKind fam = cfg.family();
  for (int i = 0; i < 4; ++i) {
    validate(cfg[i]);
    if (cfg[i].kind != FormatKind::Reference && cfg[i].kind != fam)
      throw ConfigError("precision config mixes fixed-point and block floating point: " + cfg.to_string());
  }
}

FormatKind parse_family(std::string_view name) {
  if (name == "fixed") return FormatKind::Fixed;
  if (name == "bfp") return FormatKind::Bfp;
  if (name == "ref" || name == "reference" || name == "float") return FormatKind::Reference;
  throw ConfigError("unknown format family '" + std::string(name) + "'");
}

std::string family_name(FormatKind kind) {
  switch (kind) {
    case FormatKind::Reference: return "ref";
    case FormatKind::Fixed: return "fixed";
    case FormatKind::Bfp: return "bfp";
  }
  return "?";
}

}  // namespace dsq
