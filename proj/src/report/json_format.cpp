#include <cmath>
#include <cstdio>
#include <string>

#include "prosody_eval/report.hpp"

namespace prosody_eval {
namespace {

void append_escaped(std::string& out, const std::string& s) {
  // reuse nlohmann's escaping by dumping a lone string
  out += Json(s).dump(-1, ' ', false, Json::error_handler_t::replace);
}

void append_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string text(buf);
  if (text == "-0.000000") text = "0.000000";
  out += text;
}

void emit(std::string& out, const Json& v, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map: keys already sorted
        if (!first) out += ",\n";
        first = false;
        out += pad;
        append_escaped(out, it.key());
        out += ": ";
        emit(out, it.value(), depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& item : v) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        emit(out, item, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float:
      append_number(out, v.get<double>());
      return;
    default:
      out += v.dump();
      return;
  }
}

}  // namespace

std::string canonical_json(const Json& doc) {
  std::string out;
  emit(out, doc, 0);
  out += '\n';
  return out;
}

}  // namespace prosody_eval
