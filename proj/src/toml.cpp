#include "ddss/toml.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "ddss/errors.hpp"

namespace ddss {

double TomlValue::as_number() const {
  if (kind == integer) return double(i);
  if (kind == floating) return f;
  throw ConfigError("expected a number");
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

bool bare_key_ok(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  return true;
}

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;
  std::size_t line;

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= s.size();
  }
  char peek() { return s[pos]; }
};

TomlValue parse_value(Cursor& c);

TomlValue parse_string(Cursor& c) {
  TomlValue v;
  v.kind = TomlValue::string;
  ++c.pos;  // opening quote
  while (c.pos < c.s.size() && c.s[c.pos] != '"') {
    char ch = c.s[c.pos];
    if (ch == '\\') {
      ++c.pos;
      if (c.pos >= c.s.size()) fail(c.line, "dangling escape in string");
      switch (c.s[c.pos]) {
        case '"': ch = '"'; break;
        case '\\': ch = '\\'; break;
        case 'n': ch = '\n'; break;
        case 't': ch = '\t'; break;
        default: fail(c.line, "unsupported escape in string");
      }
    }
    v.s.push_back(ch);
    ++c.pos;
  }
  if (c.pos >= c.s.size()) fail(c.line, "unterminated string");
  ++c.pos;  // closing quote
  return v;
}

TomlValue parse_number(Cursor& c) {
  const std::size_t start = c.pos;
  bool is_float = false;
  if (c.pos < c.s.size() && (c.s[c.pos] == '+' || c.s[c.pos] == '-')) ++c.pos;
  while (c.pos < c.s.size()) {
    const char ch = c.s[c.pos];
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      ++c.pos;
    } else if (ch == '.' || ch == 'e' || ch == 'E') {
      is_float = true;
      ++c.pos;
      if (c.pos < c.s.size() && (c.s[c.pos] == '+' || c.s[c.pos] == '-') &&
          (ch == 'e' || ch == 'E'))
        ++c.pos;
    } else {
      break;
    }
  }
  const std::string tok = c.s.substr(start, c.pos - start);
  if (tok.empty() || tok == "+" || tok == "-") fail(c.line, "malformed number");
  TomlValue v;
  errno = 0;
  char* end = nullptr;
  if (is_float) {
    v.kind = TomlValue::floating;
    v.f = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || errno == ERANGE || !std::isfinite(v.f))
      fail(c.line, "malformed float '" + tok + "'");
  } else {
    v.kind = TomlValue::integer;
    v.i = std::strtoll(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size() || errno == ERANGE)
      fail(c.line, "malformed integer '" + tok + "'");
  }
  return v;
}

TomlValue parse_value(Cursor& c) {
  c.skip_ws();
  if (c.pos >= c.s.size()) fail(c.line, "missing value");
  const char ch = c.peek();
  if (ch == '"') return parse_string(c);
  if (ch == '[') {
    TomlValue v;
    v.kind = TomlValue::array;
    ++c.pos;
    c.skip_ws();
    if (c.pos < c.s.size() && c.peek() == ']') {
      ++c.pos;
      return v;
    }
    for (;;) {
      v.items.push_back(parse_value(c));
      c.skip_ws();
      if (c.pos >= c.s.size()) fail(c.line, "unterminated array");
      if (c.peek() == ',') {
        ++c.pos;
        continue;
      }
      if (c.peek() == ']') {
        ++c.pos;
        return v;
      }
      fail(c.line, "expected ',' or ']' in array");
    }
  }
  if (c.s.compare(c.pos, 4, "true") == 0 &&
      (c.pos + 4 >= c.s.size() || !std::isalnum(static_cast<unsigned char>(c.s[c.pos + 4])))) {
    c.pos += 4;
    TomlValue v;
    v.kind = TomlValue::boolean;
    v.b = true;
    return v;
  }
  if (c.s.compare(c.pos, 5, "false") == 0 &&
      (c.pos + 5 >= c.s.size() || !std::isalnum(static_cast<unsigned char>(c.s[c.pos + 5])))) {
    c.pos += 5;
    TomlValue v;
    v.kind = TomlValue::boolean;
    v.b = false;
    return v;
  }
  if (ch == '+' || ch == '-' || std::isdigit(static_cast<unsigned char>(ch)))
    return parse_number(c);
  fail(c.line, "unrecognized value");
}

// strips a trailing comment, respecting quoted strings
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_str) {
      if (ch == '\\') ++i;
      else if (ch == '"') in_str = false;
    } else if (ch == '"') {
      in_str = true;
    } else if (ch == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::string section;
  bool have_section = false;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!bare_key_ok(name)) fail(lineno, "bad section name '" + name + "'");
      if (table.count(name)) fail(lineno, "duplicate section [" + name + "]");
      table[name];
      section = name;
      have_section = true;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!bare_key_ok(key)) fail(lineno, "bad key '" + key + "'");
    if (!have_section) fail(lineno, "key '" + key + "' appears before any [section]");
    if (table[section].count(key))
      fail(lineno, "duplicate key '" + key + "' in [" + section + "]");
    const std::string rest = line.substr(eq + 1);
    Cursor c{rest, 0, lineno};
    TomlValue v = parse_value(c);
    if (!c.done()) fail(lineno, "trailing characters after value");
    table[section][key] = std::move(v);
  }
  return table;
}

std::string toml_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(ch);
    }
  }
  out.push_back('"');
  return out;
}

}  // namespace ddss
