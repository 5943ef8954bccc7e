#include "sqbc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "sqbc/error.hpp"
#include "sqbc/random.hpp"

namespace sqbc {

namespace {

std::unordered_map<std::string_view, std::size_t> row_index(const EmbeddingMatrix& m) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < m.rows(); ++i) index.emplace(m.example_ids()[i], i);
  return index;
}

void append_normalized(std::vector<double>& out, std::span<const float> row) {
  double norm = 0.0;
  for (const float v : row) norm += static_cast<double>(v) * v;
  norm = std::sqrt(norm);
  for (const float v : row) out.push_back(static_cast<double>(v) / norm);
}

ReportRow skipped_row(ReportRow row, std::string reason) {
  row.skipped = true;
  row.reason = std::move(reason);
  return row;
}

}  // namespace

const std::vector<Variant>& standard_variants() {
  static const std::vector<Variant> variants = {
      {"TrueLabels", true, false, false, Selector::kAll},
      {"TrueLabels+Synth", true, false, true, Selector::kAll},
      {"SQBC", true, false, false, Selector::kSqbc},
      {"SQBC+Synth", true, false, true, Selector::kSqbc},
      {"SQBC+", true, true, false, Selector::kSqbc},
      {"SQBC++Synth", true, true, true, Selector::kSqbc},
      {"Random+Synth", true, false, true, Selector::kRandom},
  };
  return variants;
}

const Variant& variant_by_name(std::string_view name) {
  for (const auto& v : standard_variants())
    if (v.name == name) return v;
  throw Error(ErrorCode::kInvalidArgument, "unknown variant '" + std::string(name) + "'");
}

const std::vector<int>& default_kappas() {
  static const std::vector<int> kappas = {0, 1, 2, 5, 10, 20, 30};
  return kappas;
}

QuestionInput load_question_input(const std::filesystem::path& dataset,
                                  const std::filesystem::path& embeddings,
                                  const std::filesystem::path& synth,
                                  const std::filesystem::path& synth_embeddings) {
  QuestionInput input;
  input.dataset = load_question(dataset);
  input.embeddings = load_matrix(embeddings);
  input.synth = load_synthetic(synth);
  input.synth_embeddings = load_matrix(synth_embeddings);
  input.embeddings.require_ids(input.dataset.ids());
  input.synth_embeddings.require_ids(input.synth.data().ids());
  if (input.synth_embeddings.rows() != input.synth.m_total())
    throw Error(ErrorCode::kInvalidArgument,
                synth_embeddings.string() + " does not match the synthetic set size");
  if (input.embeddings.dim() != input.synth_embeddings.dim())
    throw Error(ErrorCode::kDimensionMismatch,
                "real and synthetic embeddings differ in dimension");
  return input;
}

PreparedQuestion prepare_question(const QuestionInput& input, const Split& split) {
  PreparedQuestion q;
  q.split = split;
  q.train = subset(input.dataset, split.train_ids);
  q.test = subset(input.dataset, split.test_ids);
  q.train_embeddings = input.embeddings.select(split.train_ids);
  q.test_embeddings = input.embeddings.select(split.test_ids);
  q.synth = input.synth;
  q.synth_embeddings = input.synth_embeddings;
  if (q.synth_embeddings.dim() != q.train_embeddings.dim())
    throw Error(ErrorCode::kDimensionMismatch, "synthetic and real embeddings differ in dimension");
  return q;
}

PreparedQuestion prepare_question(const QuestionInput& input, double ratio, std::uint64_t seed) {
  return prepare_question(input, split_train_test(input.dataset, ratio, seed));
}

std::uint64_t random_selection_seed(std::string_view question_id, int kappa, std::uint64_t seed) {
  return derive_seed(derive_seed(seed, stable_hash(question_id)),
                     static_cast<std::uint64_t>(kappa));
}

PoolPlan plan_pool(const PreparedQuestion& q, const Variant& v, const SelectionResult& selection,
                   std::uint64_t seed) {
  PoolPlan plan;
  plan.use_synth = v.use_synth;
  plan.sqbc_chosen = selection.chosen_ids.size();

  std::vector<std::string> chosen, not_chosen;
  switch (v.selector) {
    case Selector::kAll:
      chosen = q.train.ids();
      break;
    case Selector::kSqbc:
      chosen = selection.chosen_ids;
      not_chosen = selection.not_chosen_ids;
      break;
    case Selector::kRandom: {
      const auto ids = q.train.ids();
      auto picked = random_select(ids, selection.chosen_ids.size(),
                                  random_selection_seed(q.train.question_id, selection.kappa, seed));
      chosen = std::move(picked.chosen);
      not_chosen = std::move(picked.not_chosen);
      break;
    }
  }
  if (v.use_manual) plan.manual_ids = std::move(chosen);
  if (v.use_pseudo) {
    for (const auto& id : not_chosen) {
      const int s = selection.score_of(id);
      plan.pseudo_ids.push_back(id);
      plan.pseudo_fractions.push_back(static_cast<double>(s) / selection.k);
      plan.pseudo_labels.push_back(2 * s >= selection.k ? Stance::kFavor : Stance::kAgainst);
      if (2 * s == selection.k) ++plan.pseudo_ties;
    }
  }
  return plan;
}

std::vector<Stance> true_labels(const QuestionDataset& ds, std::span<const std::string> ids) {
  std::unordered_map<std::string_view, const Example*> index;
  for (const auto& e : ds.examples) index.emplace(e.id, &e);
  std::vector<Stance> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end())
      throw Error(ErrorCode::kInvalidArgument, "unknown example id '" + id + "'");
    if (!it->second->label)
      throw Error(ErrorCode::kInvalidArgument, "example '" + id + "' has no true label");
    out.push_back(*it->second->label);
  }
  return out;
}

EvalOutcome train_and_evaluate(const PreparedQuestion& q, const PoolPlan& plan,
                               std::span<const std::string> manual_ids,
                               std::span<const Stance> manual_labels, const TrainConfig& cfg,
                               bool soft_pseudo) {
  if (manual_ids.size() != manual_labels.size())
    throw Error(ErrorCode::kInvalidArgument, "manual ids and labels differ in length");

  EvalOutcome out;
  out.n_manual = manual_ids.size();
  out.n_pseudo = plan.pseudo_ids.size();
  out.n_synth = plan.use_synth ? q.synth_embeddings.rows() : 0;
  if (out.pool_size() == 0)
    throw Error(ErrorCode::kEmptyPool, "training pool is empty");

  const auto dim = q.train_embeddings.dim();
  FeatureMatrix x{out.pool_size(), dim, {}};
  x.data.reserve(out.pool_size() * dim);
  std::vector<double> targets;
  targets.reserve(out.pool_size());

  const auto train_rows = row_index(q.train_embeddings);
  const auto train_row = [&](const std::string& id) {
    const auto it = train_rows.find(id);
    if (it == train_rows.end())
      throw Error(ErrorCode::kInvalidArgument, "'" + id + "' is not in the train split");
    return q.train_embeddings.row(it->second);
  };
  for (std::size_t i = 0; i < manual_ids.size(); ++i) {
    append_normalized(x.data, train_row(manual_ids[i]));
    targets.push_back(to_int(manual_labels[i]));
  }
  for (std::size_t i = 0; i < plan.pseudo_ids.size(); ++i) {
    append_normalized(x.data, train_row(plan.pseudo_ids[i]));
    targets.push_back(soft_pseudo ? plan.pseudo_fractions[i] : to_int(plan.pseudo_labels[i]));
  }
  if (plan.use_synth) {
    std::unordered_map<std::string_view, Stance> synth_label;
    for (const auto& e : q.synth.examples()) synth_label.emplace(e.id, *e.label);
    for (std::size_t i = 0; i < q.synth_embeddings.rows(); ++i) {
      const auto it = synth_label.find(q.synth_embeddings.example_ids()[i]);
      if (it == synth_label.end())
        throw Error(ErrorCode::kInvalidArgument, "synthetic embedding without example");
      append_normalized(x.data, q.synth_embeddings.row(i));
      targets.push_back(to_int(it->second));
    }
  }

  const auto head = train_head(x, targets, cfg);
  out.single_class = head.single_class;

  const auto test_x = normalized_features(q.test_embeddings);
  const auto predicted = predict(head.params, test_x);
  const auto truth = true_labels(q.test, q.test_embeddings.example_ids());
  out.metrics = compute_metrics(predicted.labels, truth);
  return out;
}

bool RunReport::has_skipped() const {
  return std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.skipped; });
}

ReportRow run_variant(const PreparedQuestion& q, const Variant& v, int kappa, std::uint64_t seed,
                      const TrainConfig& cfg, bool soft_pseudo) {
  ReportRow row;
  row.question_id = q.train.question_id;
  row.variant = v.name;
  row.kappa = kappa;
  row.seed = seed;

  const auto selection = sqbc(q.train_embeddings, q.synth, q.synth_embeddings, kappa);
  const auto plan = plan_pool(q, v, selection, seed);
  const auto labels = true_labels(q.train, plan.manual_ids);
  row.n_manual = plan.manual_ids.size();
  row.n_pseudo = plan.pseudo_ids.size();
  row.n_synth = plan.use_synth ? q.synth_embeddings.rows() : 0;
  row.pool_size = row.n_manual + row.n_pseudo + row.n_synth;
  row.pseudo_ties = plan.pseudo_ties;
  try {
    const auto outcome = train_and_evaluate(q, plan, plan.manual_ids, labels, cfg, soft_pseudo);
    row.accuracy = outcome.metrics.accuracy;
    row.macro_f1 = outcome.metrics.macro_f1;
    row.f1_favor = outcome.metrics.f1_favor;
    row.f1_against = outcome.metrics.f1_against;
    if (outcome.single_class) row.reason = "single-class pool";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyPool) throw;
    return skipped_row(std::move(row), "empty training pool");
  }
  return row;
}

std::vector<std::size_t> kappa_sample_counts(const ScoreVector& scores,
                                             std::span<const int> kappas) {
  std::vector<std::size_t> out;
  out.reserve(kappas.size());
  for (const int kappa : kappas) out.push_back(select(scores, kappa).chosen.size());
  return out;
}

std::vector<AverageRow> average_rows(std::span<const ReportRow> rows) {
  std::vector<AverageRow> out;
  std::map<std::pair<std::string, int>, std::size_t> slot;
  std::vector<std::vector<const ReportRow*>> members;
  for (const auto& row : rows) {
    auto [it, inserted] = slot.try_emplace({row.variant, row.kappa}, out.size());
    if (inserted) {
      AverageRow avg;
      avg.variant = row.variant;
      avg.kappa = row.kappa;
      out.push_back(avg);
      members.emplace_back();
    }
    if (!row.skipped) members[it->second].push_back(&row);
  }
  const double nan = std::nan("");
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& avg = out[i];
    const auto& group = members[i];
    avg.n_rows = group.size();
    if (group.empty()) {
      avg.n_manual = avg.n_pseudo = avg.n_synth = nan;
      avg.accuracy = avg.macro_f1 = avg.f1_favor = avg.f1_against = nan;
      avg.accuracy_std = avg.macro_f1_std = nan;
      continue;
    }
    const auto mean = [&](auto field) {
      double sum = 0.0;
      for (const auto* r : group) sum += static_cast<double>(field(*r));
      return sum / static_cast<double>(group.size());
    };
    const auto sample_std = [&](auto field, double mu) {
      if (group.size() < 2) return 0.0;
      double ss = 0.0;
      for (const auto* r : group) ss += (field(*r) - mu) * (field(*r) - mu);
      return std::sqrt(ss / static_cast<double>(group.size() - 1));
    };
    avg.n_manual = mean([](const ReportRow& r) { return r.n_manual; });
    avg.n_pseudo = mean([](const ReportRow& r) { return r.n_pseudo; });
    avg.n_synth = mean([](const ReportRow& r) { return r.n_synth; });
    const auto acc = [](const ReportRow& r) { return r.accuracy; };
    const auto mf1 = [](const ReportRow& r) { return r.macro_f1; };
    avg.accuracy = mean(acc);
    avg.macro_f1 = mean(mf1);
    avg.f1_favor = mean([](const ReportRow& r) { return r.f1_favor; });
    avg.f1_against = mean([](const ReportRow& r) { return r.f1_against; });
    avg.accuracy_std = sample_std(acc, avg.accuracy);
    avg.macro_f1_std = sample_std(mf1, avg.macro_f1);
  }
  return out;
}

namespace {

struct CellResult {
  std::vector<ReportRow> rows;
  std::vector<KappaCount> counts;
};

CellResult run_cell(const SweepConfig& cfg, const QuestionInput& input, std::uint64_t seed) {
  const auto q = prepare_question(input, cfg.split_ratio, seed);
  CellResult cell;

  const auto base = sqbc(q.train_embeddings, q.synth, q.synth_embeddings, 0);
  const auto counts = kappa_sample_counts(base.scores, cfg.kappas);
  for (std::size_t i = 0; i < cfg.kappas.size(); ++i)
    cell.counts.push_back(
        {q.train.question_id, seed, cfg.kappas[i], q.train.size(), counts[i]});

  for (const auto& v : cfg.variants) {
    std::optional<ReportRow> shared;
    for (const int kappa : cfg.kappas) {
      if (!v.kappa_dependent()) {
        if (!shared) shared = run_variant(q, v, kappa, seed, cfg.train, cfg.soft_pseudo);
        auto row = *shared;
        row.kappa = kappa;
        cell.rows.push_back(std::move(row));
        continue;
      }
      cell.rows.push_back(run_variant(q, v, kappa, seed, cfg.train, cfg.soft_pseudo));
    }
  }
  return cell;
}

std::string cell_marker(const std::string& question_id, std::uint64_t seed) {
  return "question=" + question_id + " seed=" + std::to_string(seed);
}

}  // namespace

RunReport run_sweep(const SweepConfig& cfg, const SweepOptions& options) {
  if (cfg.kappas.empty()) throw Error(ErrorCode::kInvalidArgument, "no kappa values");
  for (std::size_t i = 0; i < cfg.kappas.size(); ++i) {
    if (cfg.kappas[i] < 0) throw Error(ErrorCode::kInvalidArgument, "kappa must be >= 0");
    if (i > 0 && cfg.kappas[i] <= cfg.kappas[i - 1])
      throw Error(ErrorCode::kInvalidArgument, "kappas must be strictly ascending");
  }
  if (cfg.seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "no seeds");
  if (cfg.variants.empty()) throw Error(ErrorCode::kInvalidArgument, "no variants");

  struct Cell {
    const QuestionInput* input;
    std::uint64_t seed;
    std::optional<CellResult> result;
  };
  std::vector<Cell> cells;
  for (const auto& input : cfg.questions)
    for (const auto seed : cfg.seeds) cells.push_back({&input, seed, std::nullopt});

  // Reuse complete cells of an earlier partial run.
  if (options.resume_from) {
    const auto expected = cfg.variants.size() * cfg.kappas.size();
    for (auto& cell : cells) {
      CellResult reused;
      for (const auto& row : options.resume_from->rows)
        if (row.question_id == cell.input->dataset.question_id && row.seed == cell.seed)
          reused.rows.push_back(row);
      for (const auto& count : options.resume_from->kappa_counts)
        if (count.question_id == cell.input->dataset.question_id && count.seed == cell.seed)
          reused.counts.push_back(count);
      if (reused.rows.size() == expected && reused.counts.size() == cfg.kappas.size())
        cell.result = std::move(reused);
    }
  }

  const auto assemble = [&](std::size_t upto) {
    RunReport report;
    for (std::size_t i = 0; i < upto; ++i) {
      const auto& r = *cells[i].result;
      report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
      report.kappa_counts.insert(report.kappa_counts.end(), r.counts.begin(), r.counts.end());
    }
    report.averages = average_rows(report.rows);
    return report;
  };

  const auto parallelism = std::max<std::size_t>(cfg.parallelism, 1);
  for (std::size_t wave = 0; wave < cells.size(); wave += parallelism) {
    const auto end = std::min(cells.size(), wave + parallelism);
    std::vector<std::pair<std::size_t, std::future<CellResult>>> inflight;
    for (std::size_t i = wave; i < end; ++i) {
      if (cells[i].result) continue;
      inflight.emplace_back(i, std::async(parallelism == 1 ? std::launch::deferred
                                                           : std::launch::async,
                                          [&cfg, &cell = cells[i]] {
                                            return run_cell(cfg, *cell.input, cell.seed);
                                          }));
    }
    std::optional<std::size_t> failed;
    std::exception_ptr error;
    for (auto& [i, future] : inflight) {
      try {
        cells[i].result = future.get();
      } catch (...) {
        if (!failed || i < *failed) {
          failed = i;
          error = std::current_exception();
        }
      }
    }
    if (failed) {
      if (options.checkpoint) {
        // Everything before the failing cell is complete and in order.
        auto partial = assemble(*failed);
        partial.resume_marker =
            cell_marker(cells[*failed].input->dataset.question_id, cells[*failed].seed);
        export_report(partial, *options.checkpoint);
      }
      std::rethrow_exception(error);
    }
  }
  return assemble(cells.size());
}

namespace {

const char* kReportHeader =
    "record,question_id,variant,kappa,seed,n_manual,n_pseudo,n_synth,pool_size,pseudo_ties,"
    "accuracy,macro_f1,f1_favor,f1_against,accuracy_std,macro_f1_std,n_rows,status,reason";
const char* kKappaHeader = "question_id,seed,kappa,n_train,n_chosen";
const char* kResumePrefix = "# resume: ";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string num(double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

double parse_real(const std::string& s) {
  if (s.empty()) return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

std::uint64_t parse_uint(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace

std::string format_report(const RunReport& report) {
  std::string out = kReportHeader;
  out += '\n';
  for (const auto& r : report.rows) {
    const auto metric = [&](double v) { return r.skipped ? std::string() : num(v); };
    out += fmt::format("row,{},{},{},{},{},{},{},{},{},{},{},{},{},,,,{},{}\n",
                       csv_field(r.question_id), csv_field(r.variant), r.kappa, r.seed,
                       r.n_manual, r.n_pseudo, r.n_synth, r.pool_size, r.pseudo_ties,
                       metric(r.accuracy), metric(r.macro_f1), metric(r.f1_favor),
                       metric(r.f1_against), r.skipped ? "skipped" : "ok", csv_field(r.reason));
  }
  for (const auto& a : report.averages) {
    out += fmt::format("mean,,{},{},,{},{},{},,,{},{},{},{},{},{},{},{},\n", csv_field(a.variant),
                       a.kappa, num(a.n_manual), num(a.n_pseudo), num(a.n_synth),
                       num(a.accuracy), num(a.macro_f1), num(a.f1_favor), num(a.f1_against),
                       num(a.accuracy_std), num(a.macro_f1_std), a.n_rows,
                       a.n_rows == 0 ? "empty" : "ok");
  }
  if (report.resume_marker) out += kResumePrefix + *report.resume_marker + '\n';
  return out;
}

std::string format_kappa_counts(std::span<const KappaCount> counts) {
  std::string out = kKappaHeader;
  out += '\n';
  for (const auto& c : counts)
    out += fmt::format("{},{},{},{},{}\n", csv_field(c.question_id), c.seed, c.kappa, c.n_train,
                       c.n_chosen);
  return out;
}

std::filesystem::path kappa_sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".kappa.csv";
  return p;
}

void export_report(const RunReport& report, const std::filesystem::path& path) {
  const auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + p.string());
  };
  write(path, format_report(report));
  write(kappa_sidecar(path), format_kappa_counts(report.kappa_counts));
}

RunReport parse_report(const std::string& text) {
  RunReport report;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool kappa_section = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (line.rfind(kResumePrefix, 0) == 0) {
        report.resume_marker = line.substr(std::string(kResumePrefix).size());
        continue;
      }
      if (line == kReportHeader) continue;
      if (line == kKappaHeader) {
        kappa_section = true;
        continue;
      }
      const auto f = split_csv(line);
      if (kappa_section) {
        if (f.size() != 5) throw std::invalid_argument("kappa row width");
        report.kappa_counts.push_back({f[0], parse_uint(f[1]), std::stoi(f[2]),
                                       static_cast<std::size_t>(parse_uint(f[3])),
                                       static_cast<std::size_t>(parse_uint(f[4]))});
        continue;
      }
      if (f.size() != 19) throw std::invalid_argument("row width");
      if (f[0] == "row") {
        ReportRow r;
        r.question_id = f[1];
        r.variant = f[2];
        r.kappa = std::stoi(f[3]);
        r.seed = parse_uint(f[4]);
        r.n_manual = parse_uint(f[5]);
        r.n_pseudo = parse_uint(f[6]);
        r.n_synth = parse_uint(f[7]);
        r.pool_size = parse_uint(f[8]);
        r.pseudo_ties = parse_uint(f[9]);
        r.skipped = f[17] == "skipped";
        if (!r.skipped) {
          r.accuracy = parse_real(f[10]);
          r.macro_f1 = parse_real(f[11]);
          r.f1_favor = parse_real(f[12]);
          r.f1_against = parse_real(f[13]);
        }
        r.reason = f[18];
        report.rows.push_back(std::move(r));
      } else if (f[0] == "mean") {
        AverageRow a;
        a.variant = f[2];
        a.kappa = std::stoi(f[3]);
        a.n_manual = parse_real(f[5]);
        a.n_pseudo = parse_real(f[6]);
        a.n_synth = parse_real(f[7]);
        a.accuracy = parse_real(f[10]);
        a.macro_f1 = parse_real(f[11]);
        a.f1_favor = parse_real(f[12]);
        a.f1_against = parse_real(f[13]);
        a.accuracy_std = parse_real(f[14]);
        a.macro_f1_std = parse_real(f[15]);
        a.n_rows = parse_uint(f[16]);
        report.averages.push_back(std::move(a));
      } else {
        throw std::invalid_argument("unknown record kind '" + f[0] + "'");
      }
    }
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kCorruptFile,
                "report line " + std::to_string(line_no) + ": " + e.what());
  }
  return report;
}

RunReport load_report(const std::filesystem::path& path) {
  const auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  auto text = read(path);
  if (std::filesystem::exists(kappa_sidecar(path))) text += read(kappa_sidecar(path));
  return parse_report(text);
}

}  // namespace sqbc
