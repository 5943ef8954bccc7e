#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sqbc/fixtures.hpp"
#include "sqbc/service.hpp"
#include "support.hpp"

using namespace sqbc;
using nlohmann::json;
using testing::TempDir;

namespace {

// Service plus server on a free port, with the fixture inputs on disk.
struct Live {
  TempDir dir;
  LabelService service{dir / "data"};
  LabelServer server;
  std::thread thread;
  int port = 0;
  QuestionInput input = fixtures::benchmark_question(1);

  explicit Live(std::optional<std::string> token = std::nullopt)
      : server(service, std::move(token)) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.serve(); });
    save_question(input.dataset, dir / "d.jsonl");
    save_matrix(input.embeddings, dir / "d.emb");
    save_synthetic(input.synth, dir / "s.jsonl");
    save_matrix(input.synth_embeddings, dir / "s.emb");
  }
  ~Live() {
    server.stop();
    thread.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(5);
    return c;
  }

  json create_body(const std::string& id, int kappa, const std::string& variant = "SQBC++Synth") {
    return {{"run_id", id},
            {"kappa", kappa},
            {"variant", variant},
            {"seed", fixtures::benchmark_questions()[1].split_seed},
            {"train", {{"epochs", 40}}},
            {"dataset", (dir / "d.jsonl").string()},
            {"embeddings", (dir / "d.emb").string()},
            {"synth", (dir / "s.jsonl").string()},
            {"synth_embeddings", (dir / "s.emb").string()}};
  }

  int truth(const std::string& id) const {
    for (const auto& e : input.dataset.examples)
      if (e.id == id) return to_int(*e.label);
    return -1;
  }
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

void check_error(const httplib::Result& r, int status, const std::string& code) {
  REQUIRE(r);
  CHECK(r->status == status);
  const auto body = json::parse(r->body);
  CHECK(body["error"] == code);
  CHECK(body["message"].is_string());
}

}  // namespace

TEST_CASE("annotation loop over HTTP") {
  Live live;
  auto c = live.client();

  const auto created = c.Post("/runs", live.create_body("h1", 0).dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto cb = json::parse(created->body);
  CHECK(cb["run_id"] == "h1");
  CHECK(cb["phase"] == "awaiting_labels");
  const auto total = cb["queue_size"].get<std::size_t>();
  REQUIRE(total > 0);

  check_error(c.Post("/runs", live.create_body("h1", 0).dump(), "application/json"), 409,
              "duplicate_run");
  CHECK(body_of(c.Get("/runs"))["runs"] == json::array({"h1"}));

  const auto state = body_of(c.Get("/runs/h1"));
  CHECK(state["phase"] == "awaiting_labels");
  CHECK(state["queue"].size() == total);
  CHECK(state["result"].is_null());

  auto next = body_of(c.Get("/runs/h1/next"));
  CHECK(next["done"] == false);
  CHECK(next["labeled"] == 0);
  CHECK(next["total"] == total);
  CHECK(next["example_id"] == state["queue"][0]["example_id"]);
  CHECK(next["question_text"] == fixtures::benchmark_questions()[1].german);
  CHECK(body_of(c.Get("/runs/h1/next")) == next);

  check_error(c.Get("/runs/h1/metrics"), 409, "not_finalized");
  check_error(c.Post("/runs/h1/finalize", "{}", "application/json"), 409, "wrong_phase");
  check_error(c.Post("/runs/h1/labels",
                     json{{"example_id", next["example_id"]}, {"label", 2}}.dump(),
                     "application/json"),
              400, "invalid_argument");
  check_error(c.Post("/runs/h1/labels",
                     json{{"example_id", next["example_id"]}, {"label", "1"}}.dump(),
                     "application/json"),
              400, "invalid_argument");
  check_error(c.Post("/runs/h1/labels", json{{"example_id", "zz"}, {"label", 1}}.dump(),
                     "application/json"),
              404, "unknown_example");
  check_error(c.Post("/runs/h1/labels", "{not json", "application/json"), 400,
              "invalid_argument");

  std::size_t labeled = 0;
  for (;;) {
    next = body_of(c.Get("/runs/h1/next"));
    if (next["done"] == true) break;
    const auto id = next["example_id"].get<std::string>();
    const auto ack = c.Post("/runs/h1/labels",
                            json{{"example_id", id}, {"label", live.truth(id)},
                                 {"annotator", "web"}}
                                .dump(),
                            "application/json");
    REQUIRE(ack);
    CHECK(ack->status == 200);
    ++labeled;
    const auto progress = json::parse(ack->body);
    CHECK(progress["labeled"] == labeled);
    CHECK(progress["remaining"] == total - labeled);
    CHECK(progress["total"] == total);
    if (labeled == 1)
      check_error(c.Post("/runs/h1/labels", json{{"example_id", id}, {"label", 0}}.dump(),
                         "application/json"),
                  409, "already_labeled");
  }
  CHECK(labeled == total);
  CHECK(next["labeled"] == total);

  const auto fin = c.Post("/runs/h1/finalize", "", "application/json");
  REQUIRE(fin);
  CHECK(fin->status == 200);
  const auto result = json::parse(fin->body);
  CHECK(result["n_manual"] == total);
  CHECK(result["n_synth"] == 40);
  CHECK(result["pool_size"] == result["n_manual"].get<int>() + result["n_pseudo"].get<int>() + 40);
  for (const char* key : {"accuracy", "macro_f1", "f1_favor", "f1_against"})
    CHECK(result["metrics"][key].is_number());

  CHECK(body_of(c.Get("/runs/h1/metrics")) == result);
  CHECK(body_of(c.Post("/runs/h1/finalize", "{}", "application/json")) == result);
  CHECK(body_of(c.Get("/runs/h1"))["phase"] == "done");
}

TEST_CASE("HTTP error contract") {
  Live live;
  auto c = live.client();
  check_error(c.Get("/runs/none"), 404, "unknown_run");
  check_error(c.Get("/runs/none/next"), 404, "unknown_run");
  check_error(c.Post("/runs", "{}", "application/json"), 400, "invalid_argument");
  auto missing = live.create_body("m", 0);
  missing["dataset"] = (live.dir / "nope.jsonl").string();
  check_error(c.Post("/runs", missing.dump(), "application/json"), 400, "invalid_argument");

  c.Post("/runs", live.create_body("bare", 0, "SQBC").dump(), "application/json");
  check_error(c.Post("/runs/bare/finalize", json{{"force", true}}.dump(), "application/json"), 422,
              "empty_pool");

  const auto wide = body_of(c.Post("/runs", live.create_body("wide", 30).dump(), "application/json"));
  CHECK(wide["phase"] == "training");
  CHECK(wide["queue_size"] == 0);
  CHECK(body_of(c.Get("/runs/wide/next"))["done"] == true);

  const auto options = c.Options("/runs/wide");
  REQUIRE(options);
  CHECK(options->status == 204);
  CHECK(options->get_header_value("Access-Control-Allow-Origin") == "*");
}

TEST_CASE("bearer token is enforced") {
  Live live("s3cret");
  auto c = live.client();
  check_error(c.Get("/runs"), 401, "unauthorized");
  c.set_bearer_token_auth("wrong");
  check_error(c.Get("/runs"), 401, "unauthorized");
  c.set_bearer_token_auth("s3cret");
  const auto ok = c.Get("/runs");
  REQUIRE(ok);
  CHECK(ok->status == 200);
}
