#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tokamata/errors.hpp"

namespace tokamata {

using ordered_json = nlohmann::ordered_json;

struct SchemaOptions {
  // Canonical whitespace is exactly one space after ':' and after ','.
  // Flexible mode makes every such space optional and also allows one
  // optional space just inside braces and brackets.
  bool flexible_whitespace = false;
};

namespace detail {

// Quotes a literal chunk of JSON text into the pattern dialect.
inline std::string escape_regex_text(const std::string& text) {
  std::string out;
  out.reserve(text.size() + 8);
  for (const char ch : text) {
    switch (ch) {
      case '\\': case '(': case ')': case '[': case ']': case '{': case '}':
      case '*': case '+': case '?': case '|': case '.': case '/':
      case '^': case '$': case '-':
        out += '\\';
        out += ch;
        break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20)
          throw SchemaError("schema text contains an unrepresentable control character");
        out += ch;
    }
  }
  return out;
}

struct JsonSeparators {
  std::string colon, comma, open_brace, close_brace, open_bracket, close_bracket;

  explicit JsonSeparators(const SchemaOptions& opt) {
    if (opt.flexible_whitespace) {
      colon = ": ?";
      comma = ", ?";
      open_brace = "\\{ ?";
      close_brace = " ?\\}";
      open_bracket = "\\[ ?";
      close_bracket = " ?\\]";
    } else {
      colon = ": ";
      comma = ", ";
      open_brace = "\\{";
      close_brace = "\\}";
      open_bracket = "\\[";
      close_bracket = "\\]";
    }
  }
};

inline constexpr const char* kStringLeaf = "(?P<QUOTED_TEXT>)";
// Numeric leaves are lexically bounded so that every string the patterns can
// generate parses losslessly downstream: at most 16 integer digits keeps
// integers inside int64, and at most two exponent digits keeps floats inside
// double range. Values a model would realistically emit are unaffected.
inline constexpr const char* kIntegerLeaf = "-?(0|[1-9][0-9]{0,15})";
inline constexpr const char* kNumberLeaf =
    "-?(0|[1-9][0-9]{0,15})(\\.[0-9]+)?([eE][+-]?[0-9]{1,2})?";
inline constexpr const char* kBooleanLeaf = "(true|false)";

class SchemaRegexBuilder {
 public:
  explicit SchemaRegexBuilder(const SchemaOptions& opt) : sep_(opt) {}

  std::string value_pattern(const ordered_json& node) {
    if (!node.is_object()) throw SchemaError("schema node must be a JSON object");
    if (node.contains("$ref"))
      throw SchemaError("$ref is not supported (recursive schemas are not regular)");

    std::string pattern;
    if (node.contains("enum")) {
      pattern = enum_pattern(node.at("enum"));
    } else if (node.contains("type")) {
      const ordered_json& type = node.at("type");
      if (type.is_array()) {
        // Union of several types.
        if (type.empty()) throw SchemaError("empty type union");
        std::string alts;
        for (const auto& t : type) {
          if (!alts.empty()) alts += '|';
          alts += typed_pattern(t.get<std::string>(), node);
        }
        pattern = "(" + alts + ")";
      } else {
        pattern = typed_pattern(type.get<std::string>(), node);
      }
    } else {
      throw SchemaError("schema node needs a \"type\" or an \"enum\"");
    }

    if (node.contains("nullable") && node.at("nullable").get<bool>())
      pattern = "(" + pattern + "|null)";
    return pattern;
  }

 private:
  std::string typed_pattern(const std::string& type, const ordered_json& node) {
    if (type == "string") return kStringLeaf;
    if (type == "integer") return kIntegerLeaf;
    if (type == "number") return kNumberLeaf;
    if (type == "boolean") return kBooleanLeaf;
    if (type == "null") return "null";
    if (type == "object") return object_pattern(node);
    if (type == "array") return array_pattern(node);
    throw SchemaError("unknown schema type \"" + type + "\"");
  }

  std::string enum_pattern(const ordered_json& values) {
    if (!values.is_array() || values.empty()) throw SchemaError("enum list must be non-empty");
    std::string alts;
    for (const auto& v : values) {
      if (v.is_object() || v.is_array())
        throw SchemaError("enum values must be scalars");
      if (!alts.empty()) alts += '|';
      alts += escape_regex_text(v.dump());
    }
    return "(" + alts + ")";
  }

  // Fields are emitted in declaration order; fields absent from "required"
  // may be omitted. The alternation branches on which field appears first,
  // which keeps the comma placement regular.
  std::string object_pattern(const ordered_json& node) {
    std::vector<std::pair<std::string, std::string>> fields;  // name -> value pattern
    std::vector<bool> required;
    if (node.contains("properties")) {
      const ordered_json& props = node.at("properties");
      if (!props.is_object()) throw SchemaError("\"properties\" must be an object");
      for (const auto& [name, sub] : props.items())
        fields.push_back({name, value_pattern(sub)});
    }
    required.assign(fields.size(), false);
    if (node.contains("required")) {
      for (const auto& name : node.at("required")) {
        const std::string n = name.get<std::string>();
        bool found = false;
        for (std::size_t i = 0; i < fields.size(); ++i) {
          if (fields[i].first == n) {
            required[i] = found = true;
            break;
          }
        }
        if (!found)
          throw SchemaError("required field \"" + n + "\" has no property definition");
      }
    }

    if (fields.empty()) return sep_.open_brace + sep_.close_brace;

    const auto field_text = [&](std::size_t i) {
      return escape_regex_text("\"" + fields[i].first + "\"") + sep_.colon + fields[i].second;
    };
    std::size_t first_required = fields.size();
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (required[i]) {
        first_required = i;
        break;
      }
    }

    std::string alts;
    for (std::size_t i = 0; i <= first_required && i < fields.size(); ++i) {
      std::string branch = field_text(i);
      for (std::size_t j = i + 1; j < fields.size(); ++j) {
        if (required[j])
          branch += sep_.comma + field_text(j);
        else
          branch += "(?:" + sep_.comma + field_text(j) + ")?";
      }
      if (!alts.empty()) alts += '|';
      alts += branch;
    }
    const bool may_be_empty = first_required == fields.size();
    return sep_.open_brace + "(?:" + alts + (may_be_empty ? ")?" : ")") + sep_.close_brace;
  }

  std::string array_pattern(const ordered_json& node) {
    if (!node.contains("items"))
      throw SchemaError("array schema needs an \"items\" definition");
    const std::string item = value_pattern(node.at("items"));
    return sep_.open_bracket + "(?:" + item + "(?:" + sep_.comma + item + ")*)?" +
           sep_.close_bracket;
  }

  JsonSeparators sep_;
};

}  // namespace detail

inline std::string json_schema_to_regex(const ordered_json& schema,
                                        const SchemaOptions& options = {}) {
  return detail::SchemaRegexBuilder(options).value_pattern(schema);
}

inline ordered_json parse_schema_json(const std::string& schema_text) {
  try {
    return ordered_json::parse(schema_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
}

// Pattern for schema-free JSON values with bounded nesting: objects may nest
// at most max_object_depth deep and arrays at most max_array_depth deep. At
// depth zero only primitives remain.
inline std::string depth_truncated_json_regex(std::uint32_t max_object_depth,
                                              std::uint32_t max_array_depth,
                                              const SchemaOptions& options = {}) {
  const detail::JsonSeparators sep(options);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::string> memo;
  const auto value = [&](auto&& self, std::uint32_t o, std::uint32_t a) -> const std::string& {
    const auto key = std::make_pair(o, a);
    const auto hit = memo.find(key);
    if (hit != memo.end()) return hit->second;
    std::string alts = std::string(detail::kStringLeaf) + "|" + detail::kNumberLeaf +
                       "|true|false|null";
    if (o > 0) {
      const std::string& inner = self(self, o - 1, a);
      const std::string kv = std::string(detail::kStringLeaf) + sep.colon + "(?:" + inner + ")";
      alts += "|" + sep.open_brace + "(?:" + kv + "(?:" + sep.comma + kv + ")*)?" +
              sep.close_brace;
    }
    if (a > 0) {
      const std::string& inner = self(self, o, a - 1);
      alts += "|" + sep.open_bracket + "(?:(?:" + inner + ")(?:" + sep.comma + "(?:" + inner +
              "))*)?" + sep.close_bracket;
    }
    return memo.emplace(key, "(" + alts + ")").first->second;
  };
  return value(value, max_object_depth, max_array_depth);
}

}  // namespace tokamata
