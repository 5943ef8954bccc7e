#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sqbc/dataset.hpp"
#include "sqbc/embedding.hpp"
#include "sqbc/head.hpp"
#include "sqbc/selection.hpp"
#include "sqbc/synthgen.hpp"

namespace sqbc {

enum class Selector { kSqbc, kRandom, kAll };

// One training-pool recipe: which of manual D_ch, pseudo-labelled D_nch and
// the synthetic set go into the pool, and who picks D_ch.
struct Variant {
  std::string name;
  bool use_manual = true;
  bool use_pseudo = false;
  bool use_synth = false;
  Selector selector = Selector::kSqbc;

  bool kappa_dependent() const { return selector != Selector::kAll; }
  bool operator==(const Variant&) const = default;
};

// TrueLabels, TrueLabels+Synth, SQBC, SQBC+Synth, SQBC+, SQBC++Synth, Random+Synth
const std::vector<Variant>& standard_variants();
const Variant& variant_by_name(std::string_view name);

const std::vector<int>& default_kappas();

// Raw inputs for one question.
struct QuestionInput {
  QuestionDataset dataset;
  EmbeddingMatrix embeddings;  // covers every example of `dataset`
  SynthDataset synth;
  EmbeddingMatrix synth_embeddings;
};

// Loads the four files of one question and checks they line up.
QuestionInput load_question_input(const std::filesystem::path& dataset,
                                  const std::filesystem::path& embeddings,
                                  const std::filesystem::path& synth,
                                  const std::filesystem::path& synth_embeddings);

// One question after its train/test split.
struct PreparedQuestion {
  Split split;
  QuestionDataset train;
  QuestionDataset test;
  EmbeddingMatrix train_embeddings;
  EmbeddingMatrix test_embeddings;
  SynthDataset synth;
  EmbeddingMatrix synth_embeddings;
};

PreparedQuestion prepare_question(const QuestionInput& input, const Split& split);
PreparedQuestion prepare_question(const QuestionInput& input, double ratio, std::uint64_t seed);

// Which train examples enter the pool and how. manual_ids and pseudo_ids
// both follow train-split order.
struct PoolPlan {
  std::vector<std::string> manual_ids;
  std::vector<std::string> pseudo_ids;
  std::vector<Stance> pseudo_labels;
  std::vector<double> pseudo_fractions;
  std::size_t pseudo_ties = 0;
  bool use_synth = false;
  std::size_t sqbc_chosen = 0;  // |D_ch| from the selector at this kappa
};

// Seed for the random selector of one (question, kappa, seed) cell.
std::uint64_t random_selection_seed(std::string_view question_id, int kappa, std::uint64_t seed);

PoolPlan plan_pool(const PreparedQuestion& q, const Variant& v, const SelectionResult& selection,
                   std::uint64_t seed);

struct EvalOutcome {
  Metrics metrics;
  std::size_t n_manual = 0;
  std::size_t n_pseudo = 0;
  std::size_t n_synth = 0;
  bool single_class = false;

  std::size_t pool_size() const { return n_manual + n_pseudo + n_synth; }
};

// Assembles the pool (manual rows with `manual_labels`, then pseudo rows,
// then synthetic rows), length-normalises it, trains the head and scores the
// test split. With `soft_pseudo` the pseudo rows train on s(n)/k instead of
// the binarised label. Throws kEmptyPool when nothing is left to train on.
EvalOutcome train_and_evaluate(const PreparedQuestion& q, const PoolPlan& plan,
                               std::span<const std::string> manual_ids,
                               std::span<const Stance> manual_labels, const TrainConfig& cfg,
                               bool soft_pseudo = false);

// True labels of `ids`, looked up in the train split.
std::vector<Stance> true_labels(const QuestionDataset& ds, std::span<const std::string> ids);

struct ReportRow {
  std::string question_id;
  std::string variant;
  int kappa = 0;
  std::uint64_t seed = 0;
  std::size_t n_manual = 0;
  std::size_t n_pseudo = 0;
  std::size_t n_synth = 0;
  std::size_t pool_size = 0;
  std::size_t pseudo_ties = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double f1_favor = 0.0;
  double f1_against = 0.0;
  bool skipped = false;
  std::string reason;

  bool operator==(const ReportRow&) const = default;
};

struct AverageRow {
  std::string variant;
  int kappa = 0;
  std::size_t n_rows = 0;  // non-skipped rows averaged
  double n_manual = 0.0;
  double n_pseudo = 0.0;
  double n_synth = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double f1_favor = 0.0;
  double f1_against = 0.0;
  double accuracy_std = 0.0;  // sample standard deviation
  double macro_f1_std = 0.0;

  bool operator==(const AverageRow&) const = default;
};

struct KappaCount {
  std::string question_id;
  std::uint64_t seed = 0;
  int kappa = 0;
  std::size_t n_train = 0;
  std::size_t n_chosen = 0;

  bool operator==(const KappaCount&) const = default;
};

struct RunReport {
  std::vector<ReportRow> rows;
  std::vector<AverageRow> averages;
  std::vector<KappaCount> kappa_counts;
  // Set when the sweep stopped early; names the next (question, seed) cell.
  std::optional<std::string> resume_marker;

  bool has_skipped() const;
};

ReportRow run_variant(const PreparedQuestion& q, const Variant& v, int kappa, std::uint64_t seed,
                      const TrainConfig& cfg, bool soft_pseudo = false);

struct SweepConfig {
  std::vector<int> kappas = default_kappas();
  std::vector<QuestionInput> questions;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  double split_ratio = 0.6;
  std::vector<Variant> variants = standard_variants();
  TrainConfig train;
  bool soft_pseudo = false;
  std::size_t parallelism = 1;
};

struct SweepOptions {
  // Written with a resume marker if the sweep fails part-way.
  std::optional<std::filesystem::path> checkpoint;
  // Rows of completed (question, seed) cells are taken from here.
  std::optional<RunReport> resume_from;
};

RunReport run_sweep(const SweepConfig& cfg, const SweepOptions& options = {});

// Means over rows grouped by (variant, kappa), in first-appearance order.
std::vector<AverageRow> average_rows(std::span<const ReportRow> rows);

// |D_ch| for each kappa, from one score vector.
std::vector<std::size_t> kappa_sample_counts(const ScoreVector& scores,
                                             std::span<const int> kappas);

// CSV with a fixed header. The kappa -> sample count table goes to
// "<path>.kappa.csv".
void export_report(const RunReport& report, const std::filesystem::path& path);
std::string format_report(const RunReport& report);
std::string format_kappa_counts(std::span<const KappaCount> counts);
RunReport parse_report(const std::string& text);
RunReport load_report(const std::filesystem::path& path);
std::filesystem::path kappa_sidecar(const std::filesystem::path& path);

}  // namespace sqbc
