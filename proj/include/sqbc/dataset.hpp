#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sqbc {

enum class Stance : int { kAgainst = 0, kFavor = 1 };

inline int to_int(Stance s) { return static_cast<int>(s); }
// Throws kInvalidArgument for anything other than 0 or 1.
Stance stance_from_int(long long value);

enum class Origin { kHuman, kSynthetic, kPseudo };

std::string_view origin_name(Origin origin);
Origin parse_origin(std::string_view name);

struct Example {
  std::string id;
  std::string question_id;
  std::string question_text;
  std::string comment_text;
  std::optional<Stance> label;
  Origin origin = Origin::kHuman;
  std::string language = "de";

  bool operator==(const Example&) const = default;
};

struct QuestionDataset {
  std::string question_id;
  std::string question_text;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  std::vector<std::string> ids() const;
  bool operator==(const QuestionDataset&) const = default;
};

struct Split {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
  double ratio = 0.6;

  bool operator==(const Split&) const = default;
};

struct ClassCounts {
  std::size_t favor = 0;
  std::size_t against = 0;
  std::size_t unlabeled = 0;

  std::size_t total() const { return favor + against + unlabeled; }
  bool operator==(const ClassCounts&) const = default;
};

// Checks id uniqueness, non-empty comments, shared question id and that
// pseudo-labelled examples carry a label.
void validate(const QuestionDataset& ds);

// Reads an X-Stance style JSONL file (question, comment, label in
// {FAVOR, AGAINST}, language). Records in other languages or, when
// `questions` is given, on other questions are dropped. Returns one dataset
// per retained question in order of first appearance.
std::vector<QuestionDataset> load_xstance(
    const std::filesystem::path& path, std::string_view language,
    const std::optional<std::vector<std::string>>& questions = std::nullopt);

// Generic record format: one JSON object per line with the fields id,
// question_id, question, comment, label (0/1/null), origin, language.
std::vector<Example> read_examples(const std::filesystem::path& path);
std::vector<Example> read_examples(std::istream& in);
void write_examples(std::span<const Example> examples, std::ostream& out);
void write_examples(std::span<const Example> examples,
                    const std::filesystem::path& path);

std::vector<QuestionDataset> group_by_question(std::vector<Example> examples);
// Loads a generic-format file that must hold exactly one question.
QuestionDataset load_question(const std::filesystem::path& path);
void save_question(const QuestionDataset& ds, const std::filesystem::path& path);

// floor(ratio * n), robust against the representation error of `ratio`.
std::size_t train_size(std::size_t n, double ratio);

// Uniform random (not stratified) train/test partition. Both id lists keep
// the dataset order.
Split split_train_test(const QuestionDataset& ds, double ratio, std::uint64_t seed);

void save_split(const Split& split, const std::filesystem::path& path);
Split load_split(const std::filesystem::path& path);

ClassCounts class_counts(std::span<const Example> examples);
inline ClassCounts class_counts(const QuestionDataset& ds) {
  return class_counts(ds.examples);
}

// Examples of `ds` whose ids appear in `ids`, in the order of `ids`.
QuestionDataset subset(const QuestionDataset& ds, std::span<const std::string> ids);

}  // namespace sqbc
