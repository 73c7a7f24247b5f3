// Field-unit handling. Internally everything is SI; conversions happen at the
// I/O boundary and physical config values must carry an explicit unit.
#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "nbm/common.hpp"

namespace nbm::units {

inline constexpr double kDarcy = 9.869233e-13;  // m^2
inline constexpr double kBar = 1.0e5;           // Pa
inline constexpr double kDay = 86400.0;         // s
inline constexpr double kCentipoise = 1.0e-3;   // Pa*s

enum class Kind {
  kLength,
  kTime,
  kPressure,
  kPermeability,
  kViscosity,
  kCompressibility,
  kDensity,
  kMassFlux,      // kg per area per time
  kVelocity,
  kConcentration,
  kDimensionless,
};

inline const std::map<std::string, double>& factors(Kind kind) {
  static const std::map<Kind, std::map<std::string, double>> table = {
      {Kind::kLength, {{"m", 1.0}, {"km", 1000.0}}},
      {Kind::kTime, {{"s", 1.0}, {"hour", 3600.0}, {"day", kDay}}},
      {Kind::kPressure, {{"Pa", 1.0}, {"kPa", 1e3}, {"MPa", 1e6}, {"bar", kBar}}},
      {Kind::kPermeability,
       {{"m2", 1.0}, {"m^2", 1.0}, {"darcy", kDarcy}, {"D", kDarcy}, {"mD", 1e-3 * kDarcy}}},
      {Kind::kViscosity, {{"Pa.s", 1.0}, {"Pa*s", 1.0}, {"cP", kCentipoise}}},
      {Kind::kCompressibility,
       {{"1/Pa", 1.0}, {"Pa^-1", 1.0}, {"1/bar", 1.0 / kBar}, {"bar^-1", 1.0 / kBar}}},
      {Kind::kDensity, {{"kg/m3", 1.0}, {"kg/m^3", 1.0}}},
      {Kind::kMassFlux,
       {{"kg/s/m2", 1.0},
        {"kg/(m^2 s)", 1.0},
        {"kg/day/m2", 1.0 / kDay},
        {"kg/(m^2 day)", 1.0 / kDay}}},
      {Kind::kVelocity, {{"m/s", 1.0}, {"m/day", 1.0 / kDay}}},
      {Kind::kConcentration, {{"ppm", 1.0}}},
      {Kind::kDimensionless, {{"-", 1.0}, {"", 1.0}}},
  };
  return table.at(kind);
}

inline double to_si(double value, const std::string& unit, Kind kind) {
  const auto& f = factors(kind);
  auto it = f.find(unit);
  if (it == f.end()) throw ConfigError("unknown unit '" + unit + "'");
  return value * it->second;
}

inline double from_si(double value, const std::string& unit, Kind kind) {
  const auto& f = factors(kind);
  auto it = f.find(unit);
  if (it == f.end()) throw ConfigError("unknown unit '" + unit + "'");
  return value / it->second;
}

// A physical config value is either {"value": x, "unit": "..."} or the string
// "x unit". Bare numbers are accepted for dimensionless kinds only.
inline double parse_quantity(const nlohmann::json& node, Kind kind,
                             const std::string& context) {
  if (node.is_number()) {
    if (kind == Kind::kDimensionless || kind == Kind::kConcentration)
      return node.get<double>();
    throw ConfigError(context + ": physical quantity must carry a unit");
  }
  if (node.is_string()) {
    const std::string s = node.get<std::string>();
    const auto sep = s.find(' ');
    if (sep == std::string::npos)
      throw ConfigError(context + ": expected '<value> <unit>', got '" + s + "'");
    try {
      return to_si(std::stod(s.substr(0, sep)), s.substr(sep + 1), kind);
    } catch (const std::invalid_argument&) {
      throw ConfigError(context + ": cannot parse numeric value in '" + s + "'");
    }
  }
  if (node.is_object()) {
    require(node.contains("value") && node.contains("unit"),
            context + ": quantity object needs 'value' and 'unit'");
    return to_si(node.at("value").get<double>(), node.at("unit").get<std::string>(), kind);
  }
  throw ConfigError(context + ": malformed quantity");
}

}  // namespace nbm::units
