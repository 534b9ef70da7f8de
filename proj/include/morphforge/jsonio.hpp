#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace morphforge {
namespace jsonio {

// Result documents must be byte-identical across reruns of the same config,
// so numbers are rendered with a fixed format: 17 significant digits, enough
// to round-trip any double. (General-purpose serializers use shortest-
// round-trip formatting, whose width varies by value; the pinned width here
// is what makes outputs comparable with `diff`.)
inline std::string format_double(double x) {
  if (!std::isfinite(x)) return "null";  // JSON has no inf/nan tokens
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

// A write-only JSON tree. Object members keep insertion order; together with
// the fixed number format this pins the output byte-for-byte.
class Json {
 public:
  enum class Kind { Null, Bool, Int, Double, String, Array, Object };

  static Json null() { return Json(Kind::Null); }
  static Json boolean(bool v) {
    Json j(Kind::Bool);
    j.bool_ = v;
    return j;
  }
  static Json integer(long long v) {
    Json j(Kind::Int);
    j.int_ = v;
    return j;
  }
  static Json number(double v) {
    Json j(Kind::Double);
    j.double_ = v;
    return j;
  }
  static Json string(std::string v) {
    Json j(Kind::String);
    j.str_ = std::move(v);
    return j;
  }
  static Json array() { return Json(Kind::Array); }
  static Json object() { return Json(Kind::Object); }

  Json& add(const std::string& key, Json v) {
    members_.emplace_back(key, std::move(v));
    return *this;
  }
  Json& add(const std::string& key, double v) { return add(key, number(v)); }
  Json& add(const std::string& key, long long v) { return add(key, integer(v)); }
  Json& add(const std::string& key, int v) { return add(key, integer(v)); }
  Json& add(const std::string& key, bool v) { return add(key, boolean(v)); }
  Json& add(const std::string& key, const char* v) { return add(key, string(v)); }
  Json& add(const std::string& key, const std::string& v) { return add(key, string(v)); }

  Json& push(Json v) {
    items_.push_back(std::move(v));
    return *this;
  }
  Json& push(double v) { return push(number(v)); }

  std::string dump(int indent = 2) const {
    std::string out;
    write(out, indent, 0);
    return out;
  }

 private:
  explicit Json(Kind k) : kind_(k) {}

  void write(std::string& out, int indent, int depth) const {
    const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
    switch (kind_) {
      case Kind::Null: out += "null"; break;
      case Kind::Bool: out += bool_ ? "true" : "false"; break;
      case Kind::Int: out += std::to_string(int_); break;
      case Kind::Double: out += format_double(double_); break;
      case Kind::String:
        out += '"';
        out += escape(str_);
        out += '"';
        break;
      case Kind::Array: {
        if (items_.empty()) {
          out += "[]";
          break;
        }
        out += "[\n";
        for (std::size_t i = 0; i < items_.size(); ++i) {
          out += pad;
          items_[i].write(out, indent, depth + 1);
          if (i + 1 < items_.size()) out += ',';
          out += '\n';
        }
        out += close_pad;
        out += ']';
        break;
      }
      case Kind::Object: {
        if (members_.empty()) {
          out += "{}";
          break;
        }
        out += "{\n";
        for (std::size_t i = 0; i < members_.size(); ++i) {
          out += pad;
          out += '"';
          out += escape(members_[i].first);
          out += "\": ";
          members_[i].second.write(out, indent, depth + 1);
          if (i + 1 < members_.size()) out += ',';
          out += '\n';
        }
        out += close_pad;
        out += '}';
        break;
      }
    }
  }

  Kind kind_;
  bool bool_ = false;
  long long int_ = 0;
  double double_ = 0;
  std::string str_;
  std::vector<Json> items_;
  std::vector<std::pair<std::string, Json>> members_;
};

}  // namespace jsonio
}  // namespace morphforge
