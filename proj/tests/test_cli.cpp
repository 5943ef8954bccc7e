#include <doctest.h>

#include <json.hpp>

#include "process.hpp"
#include "sqbc/config.hpp"
#include "sqbc/fixtures.hpp"
#include "sqbc/harness.hpp"
#include "sqbc/selection.hpp"
#include "stub_server.hpp"
#include "support.hpp"

using namespace sqbc;
using nlohmann::json;
using testing::TempDir;

namespace {

testing::RunOutput cli(const TempDir& dir, std::vector<std::string> args) {
  args.insert(args.begin(), SQBC_CLI_PATH);
  return testing::run(args, dir / "cli.log");
}

std::string path(const TempDir& dir, const std::string& name) { return (dir / name).string(); }

}  // namespace

TEST_CASE("sweep via the command line") {
  TempDir dir;
  REQUIRE(cli(dir, {"demo-data", "--out", path(dir, "ws"), "--m", "10"}).exit_code == 0);

  const auto out = cli(dir, {"sweep", "--config", path(dir, "ws/sweep.toml"), "--out",
                             path(dir, "report.csv")});
  const auto report = load_report(dir / "report.csv");
  CHECK(report.rows.size() == 245);
  CHECK(report.averages.size() == 49);
  CHECK(out.exit_code == (report.has_skipped() ? 2 : 0));
  CHECK(std::filesystem::exists(dir / "report.csv.kappa.csv"));

  // Same report as the library sweep on the same config.
  CHECK(testing::slurp(dir / "report.csv") ==
        format_report(run_sweep(load_sweep_config(dir / "ws/sweep.toml"))));

  CHECK(cli(dir, {"sweep", "--config", path(dir, "missing.toml"), "--out", path(dir, "x.csv")})
            .exit_code == 1);
  CHECK(cli(dir, {"sweep"}).exit_code != 0);
}

TEST_CASE("sweep without skipped rows exits 0") {
  TempDir dir;
  cli(dir, {"demo-data", "--out", path(dir, "ws"), "--m", "10"});
  std::ofstream(dir / "ws/small.toml")
      << "kappas = [0]\nseeds = [0]\nvariants = [\"TrueLabels\", \"SQBC++Synth\"]\n"
         "[train]\nepochs = 20\n"
         "[[questions]]\ndata = \"q1.jsonl\"\nembeddings = \"q1.emb\"\n"
         "synth = \"q1.synth.jsonl\"\nsynth_embeddings = \"q1.synth.emb\"\n";
  CHECK(cli(dir, {"sweep", "--config", path(dir, "ws/small.toml"), "--out",
                  path(dir, "r.csv")})
            .exit_code == 0);
}

TEST_CASE("failed sweep writes a checkpoint that --resume completes") {
  TempDir dir;
  cli(dir, {"demo-data", "--out", path(dir, "ws"), "--m", "10"});
  // A one-example question cannot be split.
  auto tiny = fixtures::gaussian_question("tiny", "T?", 1, 1, 10, {}, 3);
  tiny.dataset.examples.resize(1);
  save_question(tiny.dataset, dir / "ws/tiny.jsonl");
  save_matrix(tiny.embeddings, dir / "ws/tiny.emb");
  save_synthetic(tiny.synth, dir / "ws/tiny.synth.jsonl");
  save_matrix(tiny.synth_embeddings, dir / "ws/tiny.synth.emb");

  const auto entry = [](const std::string& stem) {
    return "[[questions]]\ndata = \"" + stem + ".jsonl\"\nembeddings = \"" + stem +
           ".emb\"\nsynth = \"" + stem + ".synth.jsonl\"\nsynth_embeddings = \"" + stem +
           ".synth.emb\"\n";
  };
  const std::string head = "kappas = [0, 2]\nseeds = [0]\n[train]\nepochs = 20\n";
  std::ofstream(dir / "ws/bad.toml") << head << entry("q1") << entry("tiny");
  std::ofstream(dir / "ws/good.toml") << head << entry("q1") << entry("q2");

  const auto failed = cli(dir, {"sweep", "--config", path(dir, "ws/bad.toml"), "--out",
                                path(dir, "partial.csv")});
  CHECK(failed.exit_code == 1);
  CHECK(failed.output.find("partial report") != std::string::npos);
  const auto partial = load_report(dir / "partial.csv");
  REQUIRE(partial.resume_marker.has_value());
  CHECK(*partial.resume_marker == "question=tiny seed=0");
  CHECK(partial.rows.size() == 7 * 2);

  const auto resumed = cli(dir, {"sweep", "--config", path(dir, "ws/good.toml"), "--out",
                                 path(dir, "resumed.csv"), "--resume", path(dir, "partial.csv")});
  const auto fresh = cli(dir, {"sweep", "--config", path(dir, "ws/good.toml"), "--out",
                               path(dir, "fresh.csv")});
  CHECK(resumed.exit_code == fresh.exit_code);
  CHECK(testing::slurp(dir / "resumed.csv") == testing::slurp(dir / "fresh.csv"));
}

TEST_CASE("select and split commands") {
  TempDir dir;
  const auto input = fixtures::benchmark_question(2, 20);
  const auto q = prepare_question(input, 0.6, 1);
  save_question(q.train, dir / "u.jsonl");
  save_matrix(input.embeddings, dir / "all.emb");
  save_synthetic(q.synth, dir / "s.jsonl");
  save_matrix(q.synth_embeddings, dir / "s.emb");

  REQUIRE(cli(dir, {"select", "--unlabeled", path(dir, "u.jsonl"), "--unlabeled-emb",
                    path(dir, "all.emb"), "--synth", path(dir, "s.jsonl"), "--synth-emb",
                    path(dir, "s.emb"), "--kappa", "1", "--out", path(dir, "sel.json")})
              .exit_code == 0);
  const auto sel = json::parse(testing::slurp(dir / "sel.json"));
  const auto want = sqbc::sqbc(q.train_embeddings, q.synth, q.synth_embeddings, 1);
  CHECK(sel["chosen_ids"] == want.chosen_ids);
  CHECK(sel["not_chosen_ids"] == want.not_chosen_ids);
  CHECK(sel["scores"] == want.scores.scores);
  CHECK(sel["k"] == 10);
  CHECK(sel["kappa"] == 1);
  CHECK(sel["pseudo_label_ties"] == want.pseudo_ties);
  CHECK(sel["pseudo_labels"].size() == want.not_chosen_ids.size());

  CHECK(cli(dir, {"select", "--unlabeled", path(dir, "u.jsonl"), "--unlabeled-emb",
                  path(dir, "all.emb"), "--synth", path(dir, "s.jsonl"), "--synth-emb",
                  path(dir, "s.emb"), "--kappa", "-1", "--out", path(dir, "x.json")})
            .exit_code != 0);

  save_question(input.dataset, dir / "d.jsonl");
  REQUIRE(cli(dir, {"split", "--data", path(dir, "d.jsonl"), "--seed",
                    std::to_string(fixtures::benchmark_questions()[2].split_seed), "--out",
                    path(dir, "split.json")})
              .exit_code == 0);
  const auto split = load_split(dir / "split.json");
  CHECK(split.train_ids.size() == 117);
  CHECK(split.test_ids.size() == 79);
  CHECK(class_counts(subset(input.dataset, split.train_ids)) == ClassCounts{34, 83, 0});
}

TEST_CASE("gen-synth and embed against stub endpoints") {
  testing::StubServer stub;
  int calls = 0;
  stub.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const json reply = {
        {"choices", {{{"message", {{"content", "opinion " + std::to_string(calls++)}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  stub.server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    json vectors = json::array();
    for (const auto& t : body["texts"]) {
      const auto s = t.get<std::string>();
      vectors.push_back({1.0 + static_cast<double>(s.size()), static_cast<double>(s.back())});
    }
    res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
  });
  stub.start();

  TempDir dir;
  std::ofstream(dir / "question.txt") << "Soll es so sein?\n";
  REQUIRE(cli(dir, {"gen-synth", "--question-file", path(dir, "question.txt"), "--m", "6",
                    "--out", path(dir, "synth.jsonl"), "--base-url", stub.url(), "--model", "m",
                    "--seed", "5", "--question-id", "qx"})
              .exit_code == 0);
  const auto synth = load_synthetic(dir / "synth.jsonl");
  CHECK(synth.m_total() == 6);
  CHECK(synth.data().question_text == "Soll es so sein?");
  CHECK(synth.examples()[0].id == "qx-synth-1");

  CHECK(cli(dir, {"gen-synth", "--question-file", path(dir, "question.txt"), "--m", "5",
                  "--out", path(dir, "odd.jsonl"), "--base-url", stub.url(), "--model", "m"})
            .exit_code == 1);

  const auto first = cli(dir, {"embed", "--data", path(dir, "synth.jsonl"), "--base-url",
                               stub.url(), "--model", "enc", "--cache-dir", path(dir, "cache"),
                               "--out", path(dir, "synth.emb")});
  REQUIRE(first.exit_code == 0);
  CHECK(first.output.find("0 cached, 6 sent") != std::string::npos);
  const auto second = cli(dir, {"embed", "--data", path(dir, "synth.jsonl"), "--base-url",
                                stub.url(), "--model", "enc", "--cache-dir", path(dir, "cache"),
                                "--out", path(dir, "again.emb")});
  CHECK(second.output.find("6 cached, 0 sent") != std::string::npos);
  CHECK(load_matrix(dir / "synth.emb") == load_matrix(dir / "again.emb"));
  CHECK(load_matrix(dir / "synth.emb").dim() == 2);
}
