#include "sqbc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "sqbc/error.hpp"
#include "sqbc/random.hpp"

namespace sqbc {

using nlohmann::json;

namespace {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kMalformedRecord,
              "line " + std::to_string(line) + ": " + what);
}

std::string field_as_string(const json& record, const char* key, std::size_t line) {
  const auto it = record.find(key);
  if (it == record.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  malformed(line, std::string("field '") + key + "' must be a string");
}

std::optional<Stance> parse_label(const json& record, std::size_t line) {
  const auto it = record.find("label");
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (it->is_number_integer()) {
    const auto value = it->get<long long>();
    if (value == 0) return Stance::kAgainst;
    if (value == 1) return Stance::kFavor;
    malformed(line, "label " + std::to_string(value) + " outside {0, 1}");
  }
  if (it->is_string()) {
    const auto token = it->get<std::string>();
    if (token == "FAVOR" || token == "favor") return Stance::kFavor;
    if (token == "AGAINST" || token == "against") return Stance::kAgainst;
    malformed(line, "unknown label token '" + token + "'");
  }
  malformed(line, "label must be 0, 1, FAVOR or AGAINST");
}

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      malformed(line, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) malformed(line, "record is not an object");
    fn(record, line);
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return in;
}

}  // namespace

Stance stance_from_int(long long value) {
  if (value == 0) return Stance::kAgainst;
  if (value == 1) return Stance::kFavor;
  throw Error(ErrorCode::kInvalidArgument,
              "stance must be 0 or 1, got " + std::to_string(value));
}

std::string_view origin_name(Origin origin) {
  switch (origin) {
    case Origin::kHuman: return "human";
    case Origin::kSynthetic: return "synthetic";
    case Origin::kPseudo: return "pseudo";
  }
  return "human";
}

Origin parse_origin(std::string_view name) {
  if (name == "human") return Origin::kHuman;
  if (name == "synthetic") return Origin::kSynthetic;
  if (name == "pseudo") return Origin::kPseudo;
  throw Error(ErrorCode::kInvalidArgument, "unknown origin '" + std::string(name) + "'");
}

std::vector<std::string> QuestionDataset::ids() const {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.id);
  return out;
}

void validate(const QuestionDataset& ds) {
  std::unordered_set<std::string> seen;
  for (const auto& e : ds.examples) {
    if (!seen.insert(e.id).second)
      throw Error(ErrorCode::kInvalidArgument, "duplicate example id '" + e.id + "'");
    if (e.comment_text.empty())
      throw Error(ErrorCode::kInvalidArgument, "example '" + e.id + "' has empty comment");
    if (e.question_id != ds.question_id)
      throw Error(ErrorCode::kInvalidArgument,
                  "example '" + e.id + "' belongs to question '" + e.question_id +
                      "', expected '" + ds.question_id + "'");
    if (e.origin == Origin::kPseudo && !e.label)
      throw Error(ErrorCode::kInvalidArgument,
                  "pseudo-labelled example '" + e.id + "' has no label");
  }
}

std::vector<QuestionDataset> load_xstance(
    const std::filesystem::path& path, std::string_view language,
    const std::optional<std::vector<std::string>>& questions) {
  auto in = open_input(path);
  std::unordered_set<std::string> wanted;
  if (questions)
    for (const auto& q : *questions) wanted.insert(trim(q));

  std::vector<QuestionDataset> out;
  std::unordered_map<std::string, std::size_t> by_question;
  for_each_record(in, [&](const json& record, std::size_t line) {
    const auto question = trim(field_as_string(record, "question", line));
    const auto comment = trim(field_as_string(record, "comment", line));
    const auto lang = field_as_string(record, "language", line);
    if (question.empty()) malformed(line, "missing question");
    if (comment.empty()) malformed(line, "missing comment");
    if (lang.empty()) malformed(line, "missing language");
    const auto label = parse_label(record, line);
    if (!label) malformed(line, "missing label");

    if (lang != language) return;
    if (questions && !wanted.contains(question)) return;

    auto [it, inserted] = by_question.try_emplace(question, out.size());
    if (inserted) {
      auto qid = field_as_string(record, "question_id", line);
      if (qid.empty()) qid = "q" + std::to_string(out.size());
      out.push_back(QuestionDataset{qid, question, {}});
    }
    auto& ds = out[it->second];
    Example e;
    e.id = field_as_string(record, "id", line);
    if (e.id.empty()) e.id = "q" + std::to_string(it->second) + "-" + std::to_string(line);
    e.question_id = ds.question_id;
    e.question_text = question;
    e.comment_text = comment;
    e.label = label;
    e.origin = Origin::kHuman;
    e.language = lang;
    ds.examples.push_back(std::move(e));
  });
  for (const auto& ds : out) validate(ds);
  return out;
}

std::vector<Example> read_examples(std::istream& in) {
  std::vector<Example> out;
  for_each_record(in, [&](const json& record, std::size_t line) {
    Example e;
    e.id = field_as_string(record, "id", line);
    e.question_id = field_as_string(record, "question_id", line);
    e.question_text = field_as_string(record, "question", line);
    e.comment_text = field_as_string(record, "comment", line);
    e.label = parse_label(record, line);
    const auto origin = field_as_string(record, "origin", line);
    try {
      e.origin = origin.empty() ? Origin::kHuman : parse_origin(origin);
    } catch (const Error& err) {
      malformed(line, err.what());
    }
    const auto lang = field_as_string(record, "language", line);
    if (!lang.empty()) e.language = lang;
    if (e.id.empty()) e.id = "q" + e.question_id + "-" + std::to_string(line);
    if (e.comment_text.empty()) malformed(line, "missing comment");
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<Example> read_examples(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_examples(in);
}

void write_examples(std::span<const Example> examples, std::ostream& out) {
  for (const auto& e : examples) {
    json record = {
        {"id", e.id},
        {"question_id", e.question_id},
        {"question", e.question_text},
        {"comment", e.comment_text},
        {"label", e.label ? json(to_int(*e.label)) : json(nullptr)},
        {"origin", origin_name(e.origin)},
        {"language", e.language},
    };
    out << record.dump() << '\n';
  }
}

void write_examples(std::span<const Example> examples,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_examples(examples, out);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<QuestionDataset> group_by_question(std::vector<Example> examples) {
  std::vector<QuestionDataset> out;
  std::unordered_map<std::string, std::size_t> index;
  for (auto& e : examples) {
    auto [it, inserted] = index.try_emplace(e.question_id, out.size());
    if (inserted) out.push_back(QuestionDataset{e.question_id, e.question_text, {}});
    out[it->second].examples.push_back(std::move(e));
  }
  for (const auto& ds : out) validate(ds);
  return out;
}

QuestionDataset load_question(const std::filesystem::path& path) {
  auto groups = group_by_question(read_examples(path));
  if (groups.size() != 1)
    throw Error(ErrorCode::kInvalidArgument,
                path.string() + " holds " + std::to_string(groups.size()) +
                    " questions, expected exactly one");
  return std::move(groups.front());
}

void save_question(const QuestionDataset& ds, const std::filesystem::path& path) {
  write_examples(ds.examples, path);
}

std::size_t train_size(std::size_t n, double ratio) {
  const double exact = ratio * static_cast<double>(n);
  const double nearest = std::round(exact);
  if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact))
    return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::floor(exact));
}

Split split_train_test(const QuestionDataset& ds, double ratio, std::uint64_t seed) {
  if (ds.size() < 2)
    throw Error(ErrorCode::kInvalidArgument, "cannot split fewer than two examples");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "split ratio must lie in (0, 1)");

  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<bool> in_train(ds.size(), false);
  const auto n_train = train_size(ds.size(), ratio);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  Split split;
  split.seed = seed;
  split.ratio = ratio;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (in_train[i] ? split.train_ids : split.test_ids).push_back(ds.examples[i].id);
  return split;
}

void save_split(const Split& split, const std::filesystem::path& path) {
  const json manifest = {
      {"seed", split.seed},
      {"ratio", split.ratio},
      {"train_ids", split.train_ids},
      {"test_ids", split.test_ids},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

Split load_split(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    const auto manifest = json::parse(in);
    Split split;
    split.seed = manifest.at("seed").get<std::uint64_t>();
    split.ratio = manifest.at("ratio").get<double>();
    split.train_ids = manifest.at("train_ids").get<std::vector<std::string>>();
    split.test_ids = manifest.at("test_ids").get<std::vector<std::string>>();
    return split;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, path.string() + ": " + e.what());
  }
}

ClassCounts class_counts(std::span<const Example> examples) {
  ClassCounts counts;
  for (const auto& e : examples) {
    if (!e.label)
      ++counts.unlabeled;
    else if (*e.label == Stance::kFavor)
      ++counts.favor;
    else
      ++counts.against;
  }
  return counts;
}

QuestionDataset subset(const QuestionDataset& ds, std::span<const std::string> ids) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < ds.examples.size(); ++i) index.emplace(ds.examples[i].id, i);
  QuestionDataset out{ds.question_id, ds.question_text, {}};
  out.examples.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end())
      throw Error(ErrorCode::kInvalidArgument, "unknown example id '" + id + "'");
    out.examples.push_back(ds.examples[it->second]);
  }
  return out;
}

}  // namespace sqbc
