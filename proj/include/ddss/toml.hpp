#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ddss {

// Strict single-line TOML subset: [section] headers, bare keys, strings,
// integers, floats, booleans, flat arrays, # comments. Anything else —
// duplicate keys, stray text, unterminated values — is a ConfigError naming
// the offending line.
struct TomlValue {
  enum Kind { string, integer, floating, boolean, array };
  Kind kind = integer;
  std::string s;
  std::int64_t i = 0;
  double f = 0.0;
  bool b = false;
  std::vector<TomlValue> items;

  double as_number() const;  // integer or floating
};

using TomlSection = std::map<std::string, TomlValue>;
using TomlTable = std::map<std::string, TomlSection>;

TomlTable parse_toml(const std::string& text);
std::string toml_quote(const std::string& s);

}  // namespace ddss
