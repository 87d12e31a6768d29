#pragma once

#include <cctype>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevfuse/errors.hpp"

namespace bevfuse {

// Reader for the TOML subset the shipped configs use: [table] and
// [dotted.table] headers, `key = value` pairs with bare or quoted keys,
// strings with the usual escapes, integers, floats, booleans, and flat
// arrays of those. Dates, inline tables, multi-line strings and arrays of
// tables are rejected with a line-numbered SchemaError. Output is a JSON
// tree, so downstream code handles TOML and JSON configs identically.
namespace toml {

namespace detail {

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;
  int line = 1;

  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() {
    const char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw SchemaError("line " + std::to_string(line), msg);
  }
};

inline void skip_ws(Cursor& c, bool cross_lines) {
  while (!c.eof()) {
    const char ch = c.peek();
    if (ch == ' ' || ch == '\t') {
      c.take();
    } else if (ch == '#') {
      while (!c.eof() && c.peek() != '\n') c.take();
    } else if (cross_lines && (ch == '\n' || ch == '\r')) {
      c.take();
    } else {
      break;
    }
  }
}

inline std::string parse_basic_string(Cursor& c) {
  c.take();  // opening quote
  std::string out;
  while (true) {
    if (c.eof()) c.fail("unterminated string");
    const char ch = c.take();
    if (ch == '"') break;
    if (ch == '\n') c.fail("newline inside string");
    if (ch == '\\') {
      if (c.eof()) c.fail("dangling escape");
      const char esc = c.take();
      switch (esc) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: c.fail("unsupported escape sequence");
      }
    } else {
      out += ch;
    }
  }
  return out;
}

inline std::string parse_bare_key(Cursor& c) {
  std::string out;
  while (!c.eof()) {
    const char ch = c.peek();
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' ||
        ch == '-') {
      out += c.take();
    } else {
      break;
    }
  }
  if (out.empty()) c.fail("expected a key");
  return out;
}

inline nlohmann::json parse_scalar(Cursor& c);

inline nlohmann::json parse_array(Cursor& c) {
  c.take();  // '['
  nlohmann::json arr = nlohmann::json::array();
  skip_ws(c, true);
  if (!c.eof() && c.peek() == ']') {
    c.take();
    return arr;
  }
  while (true) {
    skip_ws(c, true);
    arr.push_back(parse_scalar(c));
    skip_ws(c, true);
    if (c.eof()) c.fail("unterminated array");
    const char ch = c.take();
    if (ch == ']') break;
    if (ch != ',') c.fail("expected ',' or ']' in array");
    skip_ws(c, true);
    if (!c.eof() && c.peek() == ']') {  // trailing comma
      c.take();
      break;
    }
  }
  return arr;
}

inline nlohmann::json parse_scalar(Cursor& c) {
  if (c.eof()) c.fail("expected a value");
  const char ch = c.peek();
  if (ch == '"') return parse_basic_string(c);
  if (ch == '[') return parse_array(c);
  std::string tok;
  while (!c.eof()) {
    const char t = c.peek();
    if (t == '\n' || t == '\r' || t == '#' || t == ',' || t == ']' ||
        t == ' ' || t == '\t') {
      break;
    }
    tok += c.take();
  }
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (tok.empty()) c.fail("expected a value");
  // Number: integer if it survives as one, float otherwise.
  bool is_int = true;
  for (std::size_t i = 0; i < tok.size(); ++i) {
    const char t = tok[i];
    if (t == '+' || t == '-') {
      if (i != 0) is_int = false;
    } else if (!std::isdigit(static_cast<unsigned char>(t))) {
      is_int = false;
    }
  }
  try {
    if (is_int) return std::stoll(tok);
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) c.fail("malformed value: " + tok);
    return v;
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception&) {
    c.fail("malformed value: " + tok);
  }
}

}  // namespace detail

inline nlohmann::json parse(const std::string& text) {
  detail::Cursor c{text};
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;
  while (true) {
    detail::skip_ws(c, true);
    if (c.eof()) break;
    if (c.peek() == '[') {
      c.take();
      if (!c.eof() && c.peek() == '[') c.fail("arrays of tables unsupported");
      table = &root;
      while (true) {
        detail::skip_ws(c, false);
        const std::string part = c.peek() == '"'
                                     ? detail::parse_basic_string(c)
                                     : detail::parse_bare_key(c);
        table = &(*table)[part];
        if (table->is_null()) *table = nlohmann::json::object();
        detail::skip_ws(c, false);
        if (c.eof()) c.fail("unterminated table header");
        const char ch = c.take();
        if (ch == ']') break;
        if (ch != '.') c.fail("expected '.' or ']' in table header");
      }
      continue;
    }
    const std::string key = c.peek() == '"' ? detail::parse_basic_string(c)
                                            : detail::parse_bare_key(c);
    detail::skip_ws(c, false);
    if (c.eof() || c.take() != '=') c.fail("expected '=' after key");
    detail::skip_ws(c, false);
    (*table)[key] = detail::parse_scalar(c);
    detail::skip_ws(c, false);
    if (!c.eof() && c.peek() != '\n' && c.peek() != '\r') {
      c.fail("unexpected trailing content after value");
    }
  }
  return root;
}

}  // namespace toml
}  // namespace bevfuse
