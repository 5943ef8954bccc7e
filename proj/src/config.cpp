#include "sqbc/config.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "sqbc/error.hpp"

namespace sqbc {

using nlohmann::json;

namespace {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = parse_header(root);
      } else {
        parse_key_value(*table);
      }
      skip_inline_space();
      if (!eof() && peek() == '#') skip_comment();
      if (!eof() && peek() != '\n' && peek() != '\r') fail("expected end of line");
    }
    return root;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  char get() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::kMalformedRecord, "config line " + std::to_string(line_) + ": " + what);
  }

  void skip_comment() {
    while (!eof() && peek() != '\n') get();
  }
  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }
  void skip_blank_lines() {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n')
        get();
      else if (c == '#')
        skip_comment();
      else
        break;
    }
  }

  std::string parse_key() {
    skip_inline_space();
    if (eof()) fail("expected a key");
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-'))
      key += get();
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_dotted_key() {
    std::vector<std::string> parts{parse_key()};
    skip_inline_space();
    while (!eof() && peek() == '.') {
      get();
      parts.push_back(parse_key());
      skip_inline_space();
    }
    return parts;
  }

  json* descend(json& root, const std::vector<std::string>& path, std::size_t upto) {
    json* node = &root;
    for (std::size_t i = 0; i < upto; ++i) {
      json& child = (*node)[path[i]];
      if (child.is_null()) child = json::object();
      if (child.is_array()) {
        if (child.empty() || !child.back().is_object()) fail("'" + path[i] + "' is not a table");
        node = &child.back();
      } else if (child.is_object()) {
        node = &child;
      } else {
        fail("'" + path[i] + "' is not a table");
      }
    }
    return node;
  }

  json* parse_header(json& root) {
    get();
    const bool array = !eof() && peek() == '[';
    if (array) get();
    const auto path = parse_dotted_key();
    if (eof() || get() != ']') fail("unterminated table header");
    if (array && (eof() || get() != ']')) fail("unterminated array-of-tables header");
    json* parent = descend(root, path, path.size() - 1);
    json& slot = (*parent)[path.back()];
    if (array) {
      if (slot.is_null()) slot = json::array();
      if (!slot.is_array()) fail("'" + path.back() + "' is not an array of tables");
      slot.push_back(json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = json::object();
    if (!slot.is_object()) fail("'" + path.back() + "' redefined as a table");
    return &slot;
  }

  void parse_key_value(json& table) {
    const auto path = parse_dotted_key();
    skip_inline_space();
    if (eof() || get() != '=') fail("expected '='");
    skip_inline_space();
    json* node = descend(table, path, path.size() - 1);
    if (node->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*node)[path.back()] = parse_value();
  }

  std::string parse_basic_string() {
    get();
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      const char e = get();
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case 'u': {
          if (pos_ + 4 > text_.size()) fail("short \\u escape");
          const auto cp = std::stoul(std::string(text_.substr(pos_, 4)), nullptr, 16);
          pos_ += 4;
          append_utf8(out, static_cast<std::uint32_t>(cp));
          break;
        }
        default: fail(std::string("unknown escape \\") + e);
      }
    }
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xc0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
      out += static_cast<char>(0xe0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      out += static_cast<char>(0x80 | (cp & 0x3f));
    }
  }

  std::string parse_literal_string() {
    get();
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '\'') return out;
      out += c;
    }
  }

  json parse_value() {
    if (eof()) fail("expected a value");
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    std::string token;
    while (!eof() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' &&
           peek() != ']' && peek() != '}' && peek() != '#')
      token += get();
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char ch : token)
      if (ch != '_') digits += ch;
    if (digits.empty()) fail("expected a value");
    try {
      std::size_t used = 0;
      const bool is_float = digits.find_first_of(".eE") != std::string::npos ||
                            digits == "inf" || digits == "+inf" || digits == "-inf" ||
                            digits == "nan";
      if (is_float) {
        const double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const long long v = std::stoll(digits, &used);
        if (used == digits.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + token + "'");
  }

  json parse_array() {
    get();
    json out = json::array();
    for (;;) {
      skip_blank_lines();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        get();
        return out;
      }
      out.push_back(parse_value());
      skip_blank_lines();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        get();
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
  }

  json parse_inline_table() {
    get();
    json out = json::object();
    skip_inline_space();
    if (!eof() && peek() == '}') {
      get();
      return out;
    }
    for (;;) {
      parse_key_value(out);
      skip_inline_space();
      if (eof()) fail("unterminated inline table");
      const char c = get();
      if (c == '}') return out;
      if (c != ',') fail("expected ',' or '}' in inline table");
    }
  }
};

void reject_unknown(const json& table, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : table.items())
    if (!known.contains(key))
      throw Error(ErrorCode::kInvalidArgument, "unknown key '" + key + "' in " + where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const json& value) {
  std::filesystem::path p = value.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

QuestionInput load_question_entry(const json& entry, const std::filesystem::path& base) {
  reject_unknown(entry,
                 {"data", "xstance", "question", "language", "embeddings", "synth",
                  "synth_embeddings"},
                 "[[questions]]");
  QuestionInput input;
  if (entry.contains("data")) {
    input = load_question_input(resolve(base, entry.at("data")), resolve(base, entry.at("embeddings")),
                                resolve(base, entry.at("synth")),
                                resolve(base, entry.at("synth_embeddings")));
    return input;
  }
  const auto question = entry.at("question").get<std::string>();
  auto datasets = load_xstance(resolve(base, entry.at("xstance")), entry.value("language", "de"),
                               std::vector<std::string>{question});
  if (datasets.size() != 1)
    throw Error(ErrorCode::kInvalidArgument, "question not found in X-Stance file: " + question);
  input.dataset = std::move(datasets.front());
  input.embeddings = load_matrix(resolve(base, entry.at("embeddings")));
  input.embeddings.require_ids(input.dataset.ids());
  input.synth = load_synthetic(resolve(base, entry.at("synth")));
  input.synth_embeddings = load_matrix(resolve(base, entry.at("synth_embeddings")));
  input.synth_embeddings.require_ids(input.synth.data().ids());
  return input;
}

}  // namespace

json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

SweepConfig sweep_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  reject_unknown(doc,
                 {"kappas", "seeds", "split_ratio", "variants", "soft_pseudo_labels",
                  "parallelism", "train", "questions"},
                 "sweep config");
  SweepConfig cfg;
  try {
    if (doc.contains("kappas")) cfg.kappas = doc.at("kappas").get<std::vector<int>>();
    if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.split_ratio = doc.value("split_ratio", cfg.split_ratio);
    cfg.soft_pseudo = doc.value("soft_pseudo_labels", cfg.soft_pseudo);
    cfg.parallelism = doc.value("parallelism", cfg.parallelism);
    if (doc.contains("variants")) {
      cfg.variants.clear();
      for (const auto& name : doc.at("variants"))
        cfg.variants.push_back(variant_by_name(name.get<std::string>()));
    }
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      reject_unknown(t, {"learning_rate", "epochs", "l2", "seed"}, "[train]");
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.l2 = t.value("l2", cfg.train.l2);
      cfg.train.seed = t.value("seed", cfg.train.seed);
    }
    if (!doc.contains("questions") || doc.at("questions").empty())
      throw Error(ErrorCode::kInvalidArgument, "sweep config lists no [[questions]]");
    for (const auto& entry : doc.at("questions"))
      cfg.questions.push_back(load_question_entry(entry, base_dir));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("sweep config: ") + e.what());
  }
  return cfg;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sweep_config_from_json(parse_toml(buf.str()), path.parent_path());
}

}  // namespace sqbc
