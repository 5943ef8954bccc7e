#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sqbc/error.hpp"
#include "sqbc/harness.hpp"

namespace sqbc {

enum class RunPhase { kSelecting, kAwaitingLabels, kTraining, kDone };

std::string_view phase_name(RunPhase phase);
RunPhase parse_phase(std::string_view name);

struct RunSpec {
  std::string run_id;
  std::string variant = "SQBC++Synth";
  int kappa = 0;
  std::uint64_t seed = 0;
  double split_ratio = 0.6;
  TrainConfig train;
  bool soft_pseudo = false;

  bool operator==(const RunSpec&) const = default;
};

struct QueueItem {
  std::string example_id;
  std::string question_text;
  std::string comment_text;
  int score = 0;

  bool operator==(const QueueItem&) const = default;
};

struct ReceivedLabel {
  Stance label = Stance::kAgainst;
  std::string submitted_at;
  std::string annotator;
  std::uint64_t seq = 0;

  bool operator==(const ReceivedLabel&) const = default;
};

struct RunResult {
  Metrics metrics;
  std::size_t n_manual = 0;
  std::size_t n_pseudo = 0;
  std::size_t n_synth = 0;
  bool forced = false;
  bool single_class = false;

  bool operator==(const RunResult&) const = default;
};

struct RunState {
  std::string run_id;
  RunPhase phase = RunPhase::kSelecting;
  RunSpec spec;
  std::string config_digest;
  std::string created_at;
  std::vector<QueueItem> queue;  // most ambiguous first
  std::map<std::string, ReceivedLabel> received;
  std::optional<RunResult> result;

  std::size_t labeled() const { return received.size(); }
  std::size_t remaining() const { return queue.size() - received.size(); }
  bool operator==(const RunState&) const = default;
};

nlohmann::json to_json(const RunState& state);
nlohmann::json to_json(const RunResult& result);
nlohmann::json to_json(const Metrics& metrics);

struct Progress {
  std::size_t labeled = 0;
  std::size_t remaining = 0;
  std::size_t total = 0;
};

// Queue order: ascending |2 s(n) - k| (most ambiguous first), ties by id.
std::vector<QueueItem> order_queue(const PreparedQuestion& q, const SelectionResult& selection,
                                   std::span<const std::string> queued_ids);

// Annotation runs persisted under <data_dir>/runs/<run_id>/: copies of the
// inputs, a manifest written at creation and an append-only event log that is
// fsynced before any submission is acknowledged. Reopening a data directory
// replays every log. All mutations of one run are serialised.
class LabelService {
 public:
  explicit LabelService(std::filesystem::path data_dir);
  ~LabelService();

  LabelService(const LabelService&) = delete;
  LabelService& operator=(const LabelService&) = delete;

  // Empty spec.run_id picks a fresh id. Returns the run id.
  std::string create_run(RunSpec spec, const QuestionInput& input);

  std::vector<std::string> run_ids() const;
  RunState state(const std::string& run_id) const;
  std::optional<QueueItem> next_unlabeled(const std::string& run_id) const;
  Progress submit_label(const std::string& run_id, const std::string& example_id, long long label,
                        const std::string& annotator);
  RunResult finalize(const std::string& run_id, bool force = false);
  RunResult metrics(const std::string& run_id) const;

  // Rebuilds a run's state from its directory alone.
  static RunState replay(const std::filesystem::path& run_dir);

  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct Run;
  std::shared_ptr<Run> find(const std::string& run_id) const;
  static std::shared_ptr<Run> open_run(const std::filesystem::path& run_dir);

  std::filesystem::path data_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
};

// HTTP front end: POST /runs, GET /runs, GET /runs/{id}, GET /runs/{id}/next,
// POST /runs/{id}/labels, POST /runs/{id}/finalize, GET /runs/{id}/metrics.
class LabelServer {
 public:
  LabelServer(LabelService& service, std::optional<std::string> bearer_token = std::nullopt);
  ~LabelServer();

  // Binds and returns the port (port 0 picks a free one).
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Builds a run from a POST /runs body naming server-side input files.
std::pair<RunSpec, QuestionInput> parse_create_request(const nlohmann::json& body);

int http_status(ErrorCode code);

}  // namespace sqbc
