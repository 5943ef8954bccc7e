// sqbc: command-line front end for the selection engine, the experiment
// sweep and the annotation service.

#include <pthread.h>
#include <signal.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "sqbc/config.hpp"
#include "sqbc/error.hpp"
#include "sqbc/fixtures.hpp"
#include "sqbc/harness.hpp"
#include "sqbc/selection.hpp"
#include "sqbc/service.hpp"
#include "sqbc/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sqbc::Error(sqbc::ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw sqbc::Error(sqbc::ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::string trimmed(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && std::isspace(static_cast<unsigned char>(s[start]))) ++start;
  return s.substr(start);
}

json selection_json(const sqbc::SelectionResult& r) {
  std::vector<int> labels;
  for (const auto s : r.pseudo_labels) labels.push_back(sqbc::to_int(s));
  return {{"unlabeled_ids", r.unlabeled_ids},
          {"scores", r.scores.scores},
          {"k", r.k},
          {"kappa", r.kappa},
          {"chosen_ids", r.chosen_ids},
          {"not_chosen_ids", r.not_chosen_ids},
          {"pseudo_labels", labels},
          {"pseudo_fractions", r.pseudo_fractions},
          {"pseudo_label_ties", r.pseudo_ties}};
}

// Blocks SIGINT/SIGTERM in every thread and stops the server from a
// dedicated waiter thread.
int run_server(sqbc::LabelServer& server, const std::string& host, int port,
               const std::string& port_file) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const int bound = server.bind(host, port);
  if (!port_file.empty()) {
    const fs::path tmp = port_file + ".tmp";
    write_text(tmp, std::to_string(bound) + "\n");
    fs::rename(tmp, port_file);
  }
  std::cerr << "sqbc: listening on " << host << ":" << bound << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.serve();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SQBC active learning: synthetic-data driven sample selection"};
  app.require_subcommand(1);

  // split
  auto* split_cmd = app.add_subcommand("split", "Seeded 60/40 train/test split of a question");
  std::string split_data, split_out;
  double split_ratio = 0.6;
  std::uint64_t split_seed = 0;
  split_cmd->add_option("--data", split_data, "Question records (JSONL)")->required();
  split_cmd->add_option("--ratio", split_ratio, "Train fraction")->capture_default_str();
  split_cmd->add_option("--seed", split_seed, "Split seed")->capture_default_str();
  split_cmd->add_option("--out", split_out, "Split manifest (JSON)")->required();

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Embed records through an encoder endpoint");
  std::string embed_data, embed_out, embed_cache = ".sqbc-cache";
  sqbc::EncoderEndpoint encoder;
  std::string wire = "native";
  embed_cmd->add_option("--data", embed_data, "Records to embed (JSONL)")->required();
  embed_cmd->add_option("--base-url", encoder.base_url, "Encoder base URL")->required();
  embed_cmd->add_option("--model", encoder.model_name, "Encoder model name")->required();
  embed_cmd->add_option("--wire", wire, "Wire format")
      ->check(CLI::IsMember({"native", "openai"}))
      ->capture_default_str();
  embed_cmd->add_option("--max-batch", encoder.max_batch)->capture_default_str();
  embed_cmd->add_option("--parallelism", encoder.parallelism)->capture_default_str();
  embed_cmd->add_option("--cache-dir", embed_cache)->capture_default_str();
  embed_cmd->add_option("--out", embed_out, "Embedding matrix file")->required();

  // gen-synth
  auto* gen_cmd = app.add_subcommand("gen-synth", "Generate a balanced synthetic comment set");
  std::string question_file, gen_out;
  sqbc::SynthConfig synth_cfg;
  std::uint64_t gen_seed = 0;
  bool gen_seeded = false;
  gen_cmd->add_option("--question-file", question_file, "File holding the question text")
      ->required();
  gen_cmd->add_option("--m", synth_cfg.m_total, "Total synthetic samples (even)")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output records (JSONL)")->required();
  gen_cmd->add_option("--base-url", synth_cfg.endpoint.base_url, "Chat endpoint base URL")
      ->required();
  gen_cmd->add_option("--model", synth_cfg.endpoint.model, "Chat model")->required();
  gen_cmd->add_option("--temperature", synth_cfg.endpoint.temperature)->capture_default_str();
  gen_cmd->add_option("--max-tokens", synth_cfg.endpoint.max_tokens)->capture_default_str();
  gen_cmd->add_option("--max-retries", synth_cfg.max_retries)->capture_default_str();
  gen_cmd->add_option("--question-id", synth_cfg.question_id)->capture_default_str();
  gen_cmd->add_option("--language", synth_cfg.language)->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed, "Base seed forwarded to the endpoint")
      ->each([&](const std::string&) { gen_seeded = true; });

  // select
  auto* select_cmd = app.add_subcommand("select", "Run the SQBC selector on an unlabelled pool");
  std::string sel_unlabeled, sel_unlabeled_emb, sel_synth, sel_synth_emb, sel_out;
  int sel_kappa = 0;
  select_cmd->add_option("--unlabeled", sel_unlabeled)->required();
  select_cmd->add_option("--unlabeled-emb", sel_unlabeled_emb)->required();
  select_cmd->add_option("--synth", sel_synth)->required();
  select_cmd->add_option("--synth-emb", sel_synth_emb)->required();
  select_cmd->add_option("--kappa", sel_kappa)->required()->check(CLI::NonNegativeNumber);
  select_cmd->add_option("--out", sel_out)->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the variant x kappa x seed grid");
  std::string sweep_config, sweep_out, sweep_resume;
  sweep_cmd->add_option("--config", sweep_config, "Sweep config (TOML)")->required();
  sweep_cmd->add_option("--out", sweep_out, "Report (CSV)")->required();
  sweep_cmd->add_option("--resume", sweep_resume, "Partial report to resume from");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the annotation service");
  int port = 8080;
  std::string host = "127.0.0.1", data_dir, port_file, token;
  serve_cmd->add_option("--port", port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--data-dir", data_dir)->required();
  serve_cmd->add_option("--port-file", port_file, "Write the bound port here");
  serve_cmd->add_option("--token", token, "Require this bearer token")
      ->envname("SQBC_SERVICE_TOKEN");

  // create-run
  auto* create_cmd = app.add_subcommand("create-run", "Create an annotation run on a server");
  std::string server_url, run_data, run_emb, run_synth, run_synth_emb, run_id,
      run_variant = "SQBC++Synth";
  int run_kappa = 0;
  std::uint64_t run_seed = 0;
  create_cmd->add_option("--server", server_url, "Service base URL")->required();
  create_cmd->add_option("--data", run_data)->required();
  create_cmd->add_option("--embeddings", run_emb)->required();
  create_cmd->add_option("--synth", run_synth)->required();
  create_cmd->add_option("--synth-embeddings", run_synth_emb)->required();
  create_cmd->add_option("--kappa", run_kappa)->capture_default_str();
  create_cmd->add_option("--variant", run_variant)->capture_default_str();
  create_cmd->add_option("--seed", run_seed)->capture_default_str();
  create_cmd->add_option("--run-id", run_id);
  create_cmd->add_option("--token", token)->envname("SQBC_SERVICE_TOKEN");

  // demo-data
  auto* demo_cmd = app.add_subcommand("demo-data", "Write the five-question fixture workspace");
  std::string demo_out;
  std::size_t demo_m = 40;
  demo_cmd->add_option("--out", demo_out)->required();
  demo_cmd->add_option("--m", demo_m, "Synthetic samples per question")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*split_cmd) {
      const auto ds = sqbc::load_question(split_data);
      const auto split = sqbc::split_train_test(ds, split_ratio, split_seed);
      sqbc::save_split(split, split_out);
      std::cout << split.train_ids.size() << " train / " << split.test_ids.size() << " test\n";
    } else if (*embed_cmd) {
      encoder.wire = wire == "openai" ? sqbc::EncoderWire::kOpenAI : sqbc::EncoderWire::kNative;
      const auto examples = sqbc::read_examples(embed_data);
      sqbc::EmbedStats stats;
      const auto m = sqbc::embed_examples(encoder, examples, embed_cache, &stats);
      sqbc::save_matrix(m, embed_out);
      std::cout << m.rows() << " x " << m.dim() << " (" << stats.cache_hits << " cached, "
                << stats.texts_sent << " sent)\n";
    } else if (*gen_cmd) {
      synth_cfg.question_text = trimmed(read_text(question_file));
      if (gen_seeded) synth_cfg.seed = gen_seed;
      const auto synth = sqbc::generate_synthetic(synth_cfg);
      sqbc::save_synthetic(synth, gen_out);
      std::cout << synth.m_total() << " synthetic comments written to " << gen_out << "\n";
    } else if (*select_cmd) {
      const auto examples = sqbc::read_examples(sel_unlabeled);
      std::vector<std::string> ids;
      for (const auto& e : examples) ids.push_back(e.id);
      const auto unlabeled = sqbc::load_matrix(sel_unlabeled_emb).select(ids);
      const auto synth = sqbc::load_synthetic(sel_synth);
      const auto synth_emb = sqbc::load_matrix(sel_synth_emb);
      const auto result = sqbc::sqbc(unlabeled, synth, synth_emb, sel_kappa);
      write_text(sel_out, selection_json(result).dump(2) + "\n");
      std::cout << result.chosen_ids.size() << " chosen / " << result.not_chosen_ids.size()
                << " pseudo-labelled (k = " << result.k << ")\n";
    } else if (*sweep_cmd) {
      const auto cfg = sqbc::load_sweep_config(sweep_config);
      sqbc::SweepOptions options;
      options.checkpoint = fs::path(sweep_out);
      if (!sweep_resume.empty()) options.resume_from = sqbc::load_report(sweep_resume);
      sqbc::RunReport report;
      try {
        report = sqbc::run_sweep(cfg, options);
      } catch (const sqbc::Error& e) {
        std::cerr << "sqbc: sweep failed: " << e.what() << "\n"
                  << "sqbc: partial report written to " << sweep_out << "\n";
        return 1;
      }
      sqbc::export_report(report, sweep_out);
      std::cout << report.rows.size() << " rows, " << report.averages.size()
                << " averages written to " << sweep_out << "\n";
      return report.has_skipped() ? 2 : 0;
    } else if (*serve_cmd) {
      sqbc::LabelService service(data_dir);
      sqbc::LabelServer server(service, token.empty() ? std::nullopt
                                                      : std::optional<std::string>(token));
      return run_server(server, host, port, port_file);
    } else if (*create_cmd) {
      json body = {{"dataset", fs::absolute(run_data).string()},
                   {"embeddings", fs::absolute(run_emb).string()},
                   {"synth", fs::absolute(run_synth).string()},
                   {"synth_embeddings", fs::absolute(run_synth_emb).string()},
                   {"kappa", run_kappa},
                   {"variant", run_variant},
                   {"seed", run_seed}};
      if (!run_id.empty()) body["run_id"] = run_id;
      httplib::Client client(server_url);
      if (!token.empty()) client.set_bearer_token_auth(token);
      const auto res = client.Post("/runs", body.dump(), "application/json");
      if (!res) {
        std::cerr << "sqbc: cannot reach " << server_url << "\n";
        return 1;
      }
      std::cout << res->body << "\n";
      return res->status == 201 ? 0 : 1;
    } else if (*demo_cmd) {
      sqbc::fixtures::write_demo_workspace(demo_out, demo_m);
      std::cout << "demo workspace written to " << demo_out << "\n";
    }
  } catch (const sqbc::Error& e) {
    std::cerr << "sqbc: " << sqbc::error_code_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sqbc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
