#include <doctest.h>

#include <fstream>
#include <set>
#include <thread>

#include "sqbc/fixtures.hpp"
#include "sqbc/service.hpp"
#include "support.hpp"

using namespace sqbc;
using testing::code_of;
using testing::TempDir;

namespace {

const QuestionInput& q2_input() {
  static const auto input = fixtures::benchmark_question(1);
  return input;
}

RunSpec spec(const std::string& id, int kappa = 0, const std::string& variant = "SQBC++Synth") {
  RunSpec s;
  s.run_id = id;
  s.kappa = kappa;
  s.variant = variant;
  s.seed = fixtures::benchmark_questions()[1].split_seed;
  s.train.epochs = 60;
  return s;
}

Stance truth_of(const QuestionInput& input, const std::string& id) {
  for (const auto& e : input.dataset.examples)
    if (e.id == id) return *e.label;
  FAIL("unknown id " << id);
  return Stance::kAgainst;
}

void label_all(LabelService& svc, const std::string& run, const QuestionInput& input) {
  while (const auto item = svc.next_unlabeled(run))
    svc.submit_label(run, item->example_id, to_int(truth_of(input, item->example_id)), "tester");
}

}  // namespace

TEST_CASE("create_run builds the queue from the selector") {
  TempDir dir;
  LabelService svc(dir.path());
  const auto id = svc.create_run(spec("r1"), q2_input());
  CHECK(id == "r1");
  const auto state = svc.state(id);
  CHECK(state.phase == RunPhase::kAwaitingLabels);

  const auto q = prepare_question(q2_input(), 0.6, spec("x").seed);
  CHECK(q.train.size() == 63);
  const auto selection = sqbc::sqbc(q.train_embeddings, q.synth, q.synth_embeddings, 0);
  REQUIRE(state.queue.size() == selection.chosen_ids.size());
  CHECK_FALSE(state.queue.empty());

  // Most ambiguous first, ties by id.
  const int k = selection.k;
  for (std::size_t i = 1; i < state.queue.size(); ++i) {
    const auto& a = state.queue[i - 1];
    const auto& b = state.queue[i];
    const int da = std::abs(2 * a.score - k), db = std::abs(2 * b.score - k);
    CHECK((da < db || (da == db && a.example_id < b.example_id)));
  }
  for (const auto& item : state.queue) {
    CHECK(item.score == selection.score_of(item.example_id));
    CHECK(item.question_text == fixtures::benchmark_questions()[1].german);
  }
  CHECK(state.config_digest.size() == 16);
  CHECK(std::filesystem::exists(dir / "runs/r1/run.json"));
  CHECK(std::filesystem::exists(dir / "runs/r1/inputs/dataset.jsonl"));
}

TEST_CASE("create_run rejects duplicates and bad input") {
  TempDir dir;
  LabelService svc(dir.path());
  svc.create_run(spec("dup"), q2_input());
  CHECK(code_of([&] { svc.create_run(spec("dup"), q2_input()); }) == ErrorCode::kDuplicateRun);
  CHECK(code_of([&] { svc.create_run(spec("../evil"), q2_input()); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { svc.create_run(spec("neg", -1), q2_input()); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { svc.create_run(spec("v", 0, "Bogus"), q2_input()); }) ==
        ErrorCode::kInvalidArgument);
  const auto generated = svc.create_run(spec(""), q2_input());
  CHECK(generated.rfind("run-", 0) == 0);
  CHECK(svc.run_ids().size() == 2);
  CHECK(code_of([&] { svc.state("nope"); }) == ErrorCode::kUnknownRun);
}

TEST_CASE("labelling flow") {
  TempDir dir;
  LabelService svc(dir.path());
  const auto id = svc.create_run(spec("flow"), q2_input());
  const auto first = svc.next_unlabeled(id);
  REQUIRE(first.has_value());
  CHECK(svc.next_unlabeled(id)->example_id == first->example_id);

  const auto total = svc.state(id).queue.size();
  const auto progress = svc.submit_label(id, first->example_id, 1, "ann");
  CHECK(progress.labeled == 1);
  CHECK(progress.remaining == total - 1);
  CHECK(progress.total == total);
  if (total > 1) CHECK(svc.next_unlabeled(id)->example_id == svc.state(id).queue[1].example_id);

  CHECK(code_of([&] { svc.submit_label(id, first->example_id, 0, "ann"); }) ==
        ErrorCode::kAlreadyLabeled);
  CHECK(code_of([&] { svc.submit_label(id, "not-queued", 0, "ann"); }) ==
        ErrorCode::kUnknownExample);
  if (total > 1) {
    const auto second = svc.state(id).queue[1].example_id;
    CHECK(code_of([&] { svc.submit_label(id, second, 2, "ann"); }) ==
          ErrorCode::kInvalidArgument);
  }
  CHECK(code_of([&] { svc.metrics(id); }) == ErrorCode::kNotFinalized);
  if (total > 1) CHECK(code_of([&] { svc.finalize(id); }) == ErrorCode::kWrongPhase);

  label_all(svc, id, q2_input());
  CHECK_FALSE(svc.next_unlabeled(id).has_value());
  const auto result = svc.finalize(id);
  CHECK(svc.state(id).phase == RunPhase::kDone);
  CHECK(result.n_manual == total);
  CHECK(result.n_synth == 40);
  CHECK(result.n_manual + result.n_pseudo == 63);
  CHECK_FALSE(result.forced);
  CHECK(svc.finalize(id) == result);
  CHECK(svc.metrics(id) == result);
  CHECK(code_of([&] { svc.submit_label(id, first->example_id, 1, "ann"); }) ==
        ErrorCode::kWrongPhase);
  CHECK(std::filesystem::exists(dir / "runs/flow/result.json"));
}

TEST_CASE("empty queue and forced finalize") {
  TempDir dir;
  LabelService svc(dir.path());
  const auto wide = svc.create_run(spec("wide", 30), q2_input());
  const auto state = svc.state(wide);
  CHECK(state.queue.empty());
  CHECK(state.phase == RunPhase::kTraining);
  CHECK_FALSE(svc.next_unlabeled(wide).has_value());
  const auto r = svc.finalize(wide);
  CHECK(r.n_manual == 0);
  CHECK(r.n_pseudo == 63);
  CHECK(r.n_synth == 40);

  const auto bare = svc.create_run(spec("bare", 0, "SQBC"), q2_input());
  CHECK(code_of([&] { svc.finalize(bare, true); }) == ErrorCode::kEmptyPool);
  CHECK(svc.state(bare).phase == RunPhase::kAwaitingLabels);

  const auto item = svc.next_unlabeled(bare);
  svc.submit_label(bare, item->example_id, 1, "ann");
  const auto forced = svc.finalize(bare, true);
  CHECK(forced.forced);
  CHECK(forced.n_manual == 1);
  CHECK(forced.single_class);
}

TEST_CASE("service and batch agree with true labels") {
  TempDir dir;
  LabelService svc(dir.path());
  int n = 0;
  for (const auto* variant : {"SQBC", "SQBC+Synth", "SQBC+", "SQBC++Synth", "Random+Synth"}) {
    for (int kappa : {0, 2}) {
      const auto s = spec("parity-" + std::to_string(n++), kappa, variant);
      const auto id = svc.create_run(s, q2_input());
      label_all(svc, id, q2_input());
      const auto result = svc.finalize(id);
      const auto q = prepare_question(q2_input(), s.split_ratio, s.seed);
      const auto row = run_variant(q, variant_by_name(variant), kappa, s.seed, s.train);
      CAPTURE(variant);
      CAPTURE(kappa);
      CHECK(result.n_manual == row.n_manual);
      CHECK(result.n_pseudo == row.n_pseudo);
      CHECK(result.n_synth == row.n_synth);
      CHECK(std::abs(result.metrics.accuracy - row.accuracy) <= 1e-12);
      CHECK(std::abs(result.metrics.macro_f1 - row.macro_f1) <= 1e-12);
      CHECK(std::abs(result.metrics.f1_favor - row.f1_favor) <= 1e-12);
      CHECK(std::abs(result.metrics.f1_against - row.f1_against) <= 1e-12);
    }
  }
}

TEST_CASE("reopening a data directory replays every run") {
  TempDir dir;
  RunState before_open, before_done;
  {
    LabelService svc(dir.path());
    svc.create_run(spec("open"), q2_input());
    const auto item = svc.next_unlabeled("open");
    svc.submit_label("open", item->example_id, 0, "ann");
    before_open = svc.state("open");
    svc.create_run(spec("done", 30), q2_input());
    svc.finalize("done");
    before_done = svc.state("done");
  }
  // A torn final line from an interrupted write is ignored.
  std::ofstream(dir / "runs/open/events.log", std::ios::app) << R"({"type":"label","seq)";
  // Leftover staging directories are skipped.
  std::filesystem::create_directories(dir / "runs/.x.staging");

  LabelService svc(dir.path());
  CHECK(svc.run_ids() == std::vector<std::string>{"done", "open"});
  CHECK(svc.state("open") == before_open);
  CHECK(svc.state("done") == before_done);
  CHECK(LabelService::replay(dir / "runs/open") == before_open);
  CHECK(svc.metrics("done") == *before_done.result);

  const auto remaining = svc.state("open").remaining();
  const auto item = svc.next_unlabeled("open");
  if (item) CHECK(svc.submit_label("open", item->example_id, 1, "ann").remaining == remaining - 1);
}

TEST_CASE("corrupt event log is reported") {
  TempDir dir;
  {
    LabelService svc(dir.path());
    svc.create_run(spec("c"), q2_input());
  }
  std::ofstream(dir / "runs/c/events.log", std::ios::app) << "garbage\n{\"type\":\"x\"}\n";
  CHECK(code_of([&] { LabelService::replay(dir / "runs/c"); }) == ErrorCode::kCorruptFile);
}

TEST_CASE("concurrent submissions are serialised") {
  TempDir dir;
  LabelService svc(dir.path());
  const auto id = svc.create_run(spec("conc"), q2_input());
  const auto queue = svc.state(id).queue;
  std::vector<std::thread> threads;
  std::atomic<int> accepted{0}, rejected{0};
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (const auto& item : queue) {
        try {
          svc.submit_label(id, item.example_id, 1, "t");
          ++accepted;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kAlreadyLabeled) ++rejected;
        }
      }
    });
  for (auto& t : threads) t.join();
  CHECK(accepted == static_cast<int>(queue.size()));
  CHECK(rejected == static_cast<int>(3 * queue.size()));
  CHECK(LabelService::replay(dir / "runs/conc") == svc.state(id));

  std::set<std::uint64_t> seqs;
  for (const auto& [eid, r] : svc.state(id).received) seqs.insert(r.seq);
  CHECK(seqs.size() == queue.size());
}

TEST_CASE("http status mapping") {
  CHECK(http_status(ErrorCode::kInvalidArgument) == 400);
  CHECK(http_status(ErrorCode::kUnauthorized) == 401);
  CHECK(http_status(ErrorCode::kUnknownRun) == 404);
  CHECK(http_status(ErrorCode::kUnknownExample) == 404);
  CHECK(http_status(ErrorCode::kDuplicateRun) == 409);
  CHECK(http_status(ErrorCode::kAlreadyLabeled) == 409);
  CHECK(http_status(ErrorCode::kNotFinalized) == 409);
  CHECK(http_status(ErrorCode::kEmptyPool) == 422);
  CHECK(http_status(ErrorCode::kEndpoint) == 502);
  CHECK(http_status(ErrorCode::kIo) == 500);
}
