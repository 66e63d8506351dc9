#include "scendbg/io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "scendbg/errors.hpp"

namespace scendbg::io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << contents;
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw scendbg::ParseError(e.what(), lineno);
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::ordered_json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  for (const auto& r : records) out << r.dump() << '\n';
}

namespace {

class TomlParser {
 public:
  explicit TomlParser(const std::string& text) : text_(text) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* current = &root;
    while (!at_end()) {
      skip_blank();
      if (at_end()) break;
      if (peek() == '[') {
        current = header(root);
      } else {
        key_value(*current);
      }
      end_of_line();
    }
    return root;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  char take() { return text_[pos_++]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("toml line " + std::to_string(line_) + ": " + msg);
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_blank() {
    while (!at_end()) {
      skip_spaces();
      if (at_end()) return;
      if (peek() == '#') {
        while (!at_end() && peek() != '\n') ++pos_;
        continue;
      }
      if (peek() == '\n' || peek() == '\r') {
        if (take() == '\n') ++line_;
        continue;
      }
      return;
    }
  }

  void end_of_line() {
    skip_spaces();
    if (!at_end() && peek() == '#')
      while (!at_end() && peek() != '\n') ++pos_;
    if (at_end()) return;
    if (peek() == '\r') ++pos_;
    if (at_end()) return;
    if (peek() != '\n') fail("expected end of line");
    ++pos_;
    ++line_;
  }

  std::string bare_key() {
    skip_spaces();
    std::string key;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                         peek() == '-'))
      key += take();
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{bare_key()};
    skip_spaces();
    while (!at_end() && peek() == '.') {
      take();
      parts.push_back(bare_key());
      skip_spaces();
    }
    return parts;
  }

  nlohmann::json* header(nlohmann::json& root) {
    take();  // '['
    bool array_of_tables = !at_end() && peek() == '[';
    if (array_of_tables) take();
    auto parts = dotted_key();
    skip_spaces();
    if (at_end() || take() != ']') fail("expected ']'");
    if (array_of_tables && (at_end() || take() != ']')) fail("expected ']]'");

    nlohmann::json* node = &root;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::string& part = parts[i];
      bool last = i + 1 == parts.size();
      if (last && array_of_tables) {
        if (!node->contains(part)) (*node)[part] = nlohmann::json::array();
        (*node)[part].push_back(nlohmann::json::object());
        node = &(*node)[part].back();
      } else {
        if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
        node = &(*node)[part];
        if (node->is_array()) node = &node->back();
      }
    }
    return node;
  }

  void key_value(nlohmann::json& table) {
    auto parts = dotted_key();
    skip_spaces();
    if (at_end() || take() != '=') fail("expected '='");
    nlohmann::json v = value();
    nlohmann::json* node = &table;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) (*node)[parts[i]] = nlohmann::json::object();
      node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = std::move(v);
  }

  nlohmann::json value() {
    skip_spaces();
    if (at_end()) fail("expected a value");
    char c = peek();
    if (c == '"') return string_value();
    if (c == '[') return array_value();
    if (c == '{') return inline_table();
    if (c == 't' || c == 'f') return bool_value();
    return number_value();
  }

  nlohmann::json string_value() {
    take();  // '"'
    std::string out;
    while (!at_end() && peek() != '"') {
      char c = take();
      if (c == '\\' && !at_end()) {
        char esc = take();
        switch (esc) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape \\") + esc);
        }
      } else if (c == '\n') {
        fail("unterminated string");
      } else {
        out += c;
      }
    }
    if (at_end()) fail("unterminated string");
    take();
    return out;
  }

  nlohmann::json array_value() {
    take();  // '['
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
      skip_blank();
      if (at_end()) fail("unterminated array");
      if (peek() == ']') {
        take();
        break;
      }
      arr.push_back(value());
      skip_blank();
      if (!at_end() && peek() == ',') take();
    }
    return arr;
  }

  nlohmann::json inline_table() {
    take();  // '{'
    nlohmann::json obj = nlohmann::json::object();
    skip_spaces();
    if (!at_end() && peek() == '}') {
      take();
      return obj;
    }
    while (true) {
      std::string key = bare_key();
      skip_spaces();
      if (at_end() || take() != '=') fail("expected '=' in inline table");
      obj[key] = value();
      skip_spaces();
      if (at_end()) fail("unterminated inline table");
      char c = take();
      if (c == '}') break;
      if (c != ',') fail("expected ',' or '}'");
      skip_spaces();
    }
    return obj;
  }

  nlohmann::json bool_value() {
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    fail("expected a boolean");
  }

  nlohmann::json number_value() {
    std::size_t start = pos_;
    bool is_float = false;
    if (peek() == '+' || peek() == '-') ++pos_;
    while (!at_end() &&
           (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == 'e' ||
            peek() == 'E' || peek() == '+' || peek() == '-' || peek() == '_')) {
      if (peek() == '.' || peek() == 'e' || peek() == 'E') is_float = true;
      ++pos_;
    }
    std::string text = text_.substr(start, pos_ - start);
    std::erase(text, '_');
    if (text.empty() || text == "+" || text == "-") fail("expected a number");
    try {
      if (is_float) return std::stod(text);
      return static_cast<std::int64_t>(std::stoll(text));
    } catch (const std::exception&) {
      fail("malformed number: " + text);
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

nlohmann::json parse_toml(const std::string& text) { return TomlParser(text).parse(); }

nlohmann::json read_config(const std::string& path) {
  std::string text = read_file(path);
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".toml") == 0)
    return parse_toml(text);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace scendbg::io
