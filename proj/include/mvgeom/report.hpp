#pragma once

// JSON reports: sorted keys, reals printed with 17 significant digits so
// every f64 re-parses to the identical value.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "mvgeom/error.hpp"

namespace mvgeom {

using Report = nlohmann::json;

namespace detail {

inline void emit_json(const Report& v, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent), ' ');
  switch (v.type()) {
    case Report::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      // nlohmann::json objects are std::map-backed, so iteration is key-sorted.
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Report(it.key()).dump() + ": ";
        emit_json(it.value(), out, indent + 2);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Report::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        emit_json(v[i], out, indent + 2);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case Report::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", d);
      out += buf;
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace detail

inline std::string format_report(const Report& report) {
  std::string out;
  detail::emit_json(report, out, 0);
  out += "\n";
  return out;
}

inline void write_report(const std::filesystem::path& path, const Report& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, path.string());
  out << format_report(report);
  if (!out) throw Error(ErrorCode::IoFailure, path.string() + ": write failed");
}

inline Report read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  try {
    return Report::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedLine, path.string() + ": " + e.what());
  }
}

}  // namespace mvgeom
