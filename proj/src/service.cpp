#include "sqbc/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <fcntl.h>
#include <unistd.h>

#include "sqbc/random.hpp"

namespace sqbc {

using nlohmann::json;

namespace {

constexpr const char* kManifest = "run.json";
constexpr const char* kEvents = "events.log";
constexpr const char* kResult = "result.json";

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm utc{};
  gmtime_r(&secs, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &utc);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(millis));
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool valid_run_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.';
  });
}

void fsync_path(const std::filesystem::path& path, int flags) {
  const int fd = ::open(path.c_str(), flags);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

// Appends one line and fsyncs before returning.
void append_durable(const std::filesystem::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const std::string data = line + '\n';
  std::size_t written = 0;
  while (written < data.size()) {
    const auto n = ::write(fd, data.data() + written, data.size() - written);
    if (n < 0) {
      ::close(fd);
      throw Error(ErrorCode::kIo, "cannot append to " + path.string());
    }
    written += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw Error(ErrorCode::kIo, "fsync failed for " + path.string());
}

void write_durable(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  fsync_path(tmp, O_RDONLY);
  std::filesystem::rename(tmp, path);
  fsync_path(path.parent_path(), O_RDONLY | O_DIRECTORY);
}

json spec_json(const RunSpec& s) {
  return {{"run_id", s.run_id},
          {"variant", s.variant},
          {"kappa", s.kappa},
          {"seed", s.seed},
          {"split_ratio", s.split_ratio},
          {"train",
           {{"learning_rate", s.train.learning_rate},
            {"epochs", s.train.epochs},
            {"l2", s.train.l2},
            {"seed", s.train.seed}}},
          {"soft_pseudo_labels", s.soft_pseudo}};
}

RunSpec spec_from_json(const json& j) {
  RunSpec s;
  s.run_id = j.value("run_id", std::string());
  s.variant = j.value("variant", s.variant);
  s.kappa = j.value("kappa", s.kappa);
  s.seed = j.value("seed", s.seed);
  s.split_ratio = j.value("split_ratio", s.split_ratio);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    s.train.learning_rate = t.value("learning_rate", s.train.learning_rate);
    s.train.epochs = t.value("epochs", s.train.epochs);
    s.train.l2 = t.value("l2", s.train.l2);
    s.train.seed = t.value("seed", s.train.seed);
  }
  s.soft_pseudo = j.value("soft_pseudo_labels", s.soft_pseudo);
  return s;
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.accuracy = j.at("accuracy").get<double>();
  m.f1_favor = j.at("f1_favor").get<double>();
  m.f1_against = j.at("f1_against").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  const auto c = j.at("confusion");
  for (int t = 0; t < 2; ++t)
    for (int p = 0; p < 2; ++p) m.confusion[t][p] = c.at(t).at(p).get<std::size_t>();
  return m;
}

RunResult result_from_json(const json& j) {
  RunResult r;
  r.metrics = metrics_from_json(j.at("metrics"));
  r.n_manual = j.at("n_manual").get<std::size_t>();
  r.n_pseudo = j.at("n_pseudo").get<std::size_t>();
  r.n_synth = j.at("n_synth").get<std::size_t>();
  r.forced = j.at("forced").get<bool>();
  r.single_class = j.at("single_class").get<bool>();
  return r;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct InputPaths {
  std::filesystem::path dataset, embeddings, synth, synth_embeddings;
};

InputPaths input_paths(const std::filesystem::path& run_dir) {
  const auto dir = run_dir / "inputs";
  return {dir / "dataset.jsonl", dir / "embeddings.emb", dir / "synth.jsonl",
          dir / "synth.emb"};
}

void check_label_event(const RunState& state, const std::string& example_id) {
  if (state.phase != RunPhase::kAwaitingLabels)
    throw Error(ErrorCode::kWrongPhase, "run '" + state.run_id + "' is in phase " +
                                            std::string(phase_name(state.phase)) +
                                            ", not awaiting_labels");
  const bool queued = std::any_of(state.queue.begin(), state.queue.end(),
                                  [&](const QueueItem& q) { return q.example_id == example_id; });
  if (!queued)
    throw Error(ErrorCode::kUnknownExample,
                "example '" + example_id + "' is not queued in run '" + state.run_id + "'");
  if (state.received.contains(example_id))
    throw Error(ErrorCode::kAlreadyLabeled, "example '" + example_id + "' is already labelled");
}

}  // namespace

std::string_view phase_name(RunPhase phase) {
  switch (phase) {
    case RunPhase::kSelecting: return "selecting";
    case RunPhase::kAwaitingLabels: return "awaiting_labels";
    case RunPhase::kTraining: return "training";
    case RunPhase::kDone: return "done";
  }
  return "selecting";
}

RunPhase parse_phase(std::string_view name) {
  for (const auto p : {RunPhase::kSelecting, RunPhase::kAwaitingLabels, RunPhase::kTraining,
                       RunPhase::kDone})
    if (phase_name(p) == name) return p;
  throw Error(ErrorCode::kInvalidArgument, "unknown phase '" + std::string(name) + "'");
}

json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"f1_favor", m.f1_favor},
          {"f1_against", m.f1_against},
          {"macro_f1", m.macro_f1},
          {"confusion",
           {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}}}};
}

json to_json(const RunResult& r) {
  return {{"metrics", to_json(r.metrics)},
          {"n_manual", r.n_manual},
          {"n_pseudo", r.n_pseudo},
          {"n_synth", r.n_synth},
          {"pool_size", r.n_manual + r.n_pseudo + r.n_synth},
          {"forced", r.forced},
          {"single_class", r.single_class}};
}

json to_json(const RunState& s) {
  json queue = json::array();
  for (const auto& q : s.queue)
    queue.push_back({{"example_id", q.example_id},
                     {"question_text", q.question_text},
                     {"comment_text", q.comment_text},
                     {"score", q.score}});
  json received = json::object();
  for (const auto& [id, r] : s.received)
    received[id] = {{"label", to_int(r.label)},
                    {"submitted_at", r.submitted_at},
                    {"annotator", r.annotator},
                    {"seq", r.seq}};
  return {{"run_id", s.run_id},
          {"phase", phase_name(s.phase)},
          {"spec", spec_json(s.spec)},
          {"config_digest", s.config_digest},
          {"created_at", s.created_at},
          {"queue", queue},
          {"received", received},
          {"labeled", s.labeled()},
          {"remaining", s.remaining()},
          {"total", s.queue.size()},
          {"result", s.result ? to_json(*s.result) : json(nullptr)}};
}

std::vector<QueueItem> order_queue(const PreparedQuestion& q, const SelectionResult& selection,
                                   std::span<const std::string> queued_ids) {
  std::unordered_map<std::string_view, const Example*> examples;
  for (const auto& e : q.train.examples) examples.emplace(e.id, &e);
  std::vector<QueueItem> queue;
  for (const auto& id : queued_ids) {
    const auto* e = examples.at(id);
    queue.push_back({id, e->question_text, e->comment_text, selection.score_of(id)});
  }
  const int k = selection.k;
  std::sort(queue.begin(), queue.end(), [k](const QueueItem& a, const QueueItem& b) {
    const int da = std::abs(2 * a.score - k), db = std::abs(2 * b.score - k);
    if (da != db) return da < db;
    return a.example_id < b.example_id;
  });
  return queue;
}

struct LabelService::Run {
  std::mutex mutex;
  std::filesystem::path dir;
  RunState state;
  PreparedQuestion question;
  SelectionResult selection;
  PoolPlan plan;
};

namespace {

// Recomputes the deterministic selection for a run from its stored inputs.
void rebuild_selection(const RunSpec& spec, const QuestionInput& input, PreparedQuestion& question,
                       SelectionResult& selection, PoolPlan& plan) {
  const auto& variant = variant_by_name(spec.variant);
  if (!variant.use_manual)
    throw Error(ErrorCode::kInvalidArgument,
                "variant '" + spec.variant + "' does not use manual labels");
  question = prepare_question(input, spec.split_ratio, spec.seed);
  selection = sqbc(question.train_embeddings, question.synth, question.synth_embeddings,
                   spec.kappa);
  plan = plan_pool(question, variant, selection, spec.seed);
}

}  // namespace

LabelService::LabelService(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
  std::filesystem::create_directories(data_dir_ / "runs");
  for (const auto& entry : std::filesystem::directory_iterator(data_dir_ / "runs")) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    if (!valid_run_id(name)) continue;  // leftovers of interrupted creations
    auto run = open_run(entry.path());
    runs_.emplace(run->state.run_id, std::move(run));
  }
}

LabelService::~LabelService() = default;

RunState LabelService::replay(const std::filesystem::path& run_dir) {
  RunState state;
  try {
    const auto manifest = json::parse(read_text(run_dir / kManifest));
    state.run_id = manifest.at("run_id").get<std::string>();
    state.spec = spec_from_json(manifest.at("spec"));
    state.config_digest = manifest.at("config_digest").get<std::string>();
    state.created_at = manifest.at("created_at").get<std::string>();
    for (const auto& q : manifest.at("queue"))
      state.queue.push_back({q.at("example_id").get<std::string>(),
                             q.at("question_text").get<std::string>(),
                             q.at("comment_text").get<std::string>(), q.at("score").get<int>()});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, (run_dir / kManifest).string() + ": " + e.what());
  }
  state.phase = state.queue.empty() ? RunPhase::kTraining : RunPhase::kAwaitingLabels;

  std::ifstream log(run_dir / kEvents, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(log, line)) {
    ++line_no;
    // A crash can leave a torn, never-acknowledged final line.
    if (log.eof()) break;
    json event;
    try {
      event = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kCorruptFile,
                  (run_dir / kEvents).string() + " line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    const auto type = event.at("type").get<std::string>();
    if (type == "label") {
      const auto id = event.at("example_id").get<std::string>();
      check_label_event(state, id);
      state.received[id] = {stance_from_int(event.at("label").get<long long>()),
                            event.at("submitted_at").get<std::string>(),
                            event.at("annotator").get<std::string>(),
                            event.at("seq").get<std::uint64_t>()};
    } else if (type == "finalize") {
      state.result = result_from_json(event.at("result"));
      state.phase = RunPhase::kDone;
    } else {
      throw Error(ErrorCode::kCorruptFile, "unknown event type '" + type + "'");
    }
  }
  return state;
}

std::shared_ptr<LabelService::Run> LabelService::open_run(const std::filesystem::path& run_dir) {
  auto run = std::make_shared<Run>();
  run->dir = run_dir;
  run->state = replay(run_dir);
  const auto paths = input_paths(run_dir);
  const auto input = load_question_input(paths.dataset, paths.embeddings, paths.synth,
                                         paths.synth_embeddings);
  rebuild_selection(run->state.spec, input, run->question, run->selection, run->plan);
  return run;
}

std::shared_ptr<LabelService::Run> LabelService::find(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  const auto it = runs_.find(run_id);
  if (it == runs_.end()) throw Error(ErrorCode::kUnknownRun, "unknown run '" + run_id + "'");
  return it->second;
}

std::string LabelService::create_run(RunSpec spec, const QuestionInput& input) {
  if (spec.run_id.empty()) {
    std::random_device rd;
    spec.run_id = "run-" + hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  }
  if (!valid_run_id(spec.run_id))
    throw Error(ErrorCode::kInvalidArgument, "invalid run id '" + spec.run_id + "'");
  if (spec.kappa < 0) throw Error(ErrorCode::kInvalidArgument, "kappa must be >= 0");

  auto run = std::make_shared<Run>();
  run->state.run_id = spec.run_id;
  run->state.spec = spec;
  run->state.phase = RunPhase::kSelecting;
  rebuild_selection(spec, input, run->question, run->selection, run->plan);

  std::lock_guard lock(mutex_);
  const auto final_dir = data_dir_ / "runs" / spec.run_id;
  if (runs_.contains(spec.run_id) || std::filesystem::exists(final_dir))
    throw Error(ErrorCode::kDuplicateRun, "run '" + spec.run_id + "' already exists");

  // Stage everything in a hidden directory, then publish with one rename.
  const auto staging = data_dir_ / "runs" / ("." + spec.run_id + ".staging");
  std::filesystem::remove_all(staging);
  std::filesystem::create_directories(staging / "inputs");
  const auto paths = input_paths(staging);
  save_question(input.dataset, paths.dataset);
  save_matrix(input.embeddings, paths.embeddings);
  save_synthetic(input.synth, paths.synth);
  save_matrix(input.synth_embeddings, paths.synth_embeddings);

  std::string digest_source = spec_json(spec).dump();
  for (const auto& p : {paths.dataset, paths.embeddings, paths.synth, paths.synth_embeddings})
    digest_source += read_text(p);
  run->state.config_digest = hex64(stable_hash(digest_source));
  run->state.created_at = now_iso8601();
  run->state.queue = order_queue(run->question, run->selection, run->plan.manual_ids);

  json queue = json::array();
  for (const auto& q : run->state.queue)
    queue.push_back({{"example_id", q.example_id},
                     {"question_text", q.question_text},
                     {"comment_text", q.comment_text},
                     {"score", q.score}});
  const json manifest = {{"run_id", spec.run_id},
                         {"spec", spec_json(spec)},
                         {"config_digest", run->state.config_digest},
                         {"created_at", run->state.created_at},
                         {"queue", queue}};
  write_durable(staging / kManifest, manifest.dump(2) + "\n");
  std::ofstream(staging / kEvents, std::ios::trunc).close();
  std::filesystem::rename(staging, final_dir);
  fsync_path(data_dir_ / "runs", O_RDONLY | O_DIRECTORY);

  run->dir = final_dir;
  run->state.phase = run->state.queue.empty() ? RunPhase::kTraining : RunPhase::kAwaitingLabels;
  runs_.emplace(spec.run_id, std::move(run));
  return spec.run_id;
}

std::vector<std::string> LabelService::run_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, run] : runs_) ids.push_back(id);
  return ids;
}

RunState LabelService::state(const std::string& run_id) const {
  const auto run = find(run_id);
  std::lock_guard lock(run->mutex);
  return run->state;
}

std::optional<QueueItem> LabelService::next_unlabeled(const std::string& run_id) const {
  const auto run = find(run_id);
  std::lock_guard lock(run->mutex);
  for (const auto& item : run->state.queue)
    if (!run->state.received.contains(item.example_id)) return item;
  return std::nullopt;
}

Progress LabelService::submit_label(const std::string& run_id, const std::string& example_id,
                                    long long label, const std::string& annotator) {
  const auto run = find(run_id);
  std::lock_guard lock(run->mutex);
  const auto stance = stance_from_int(label);
  check_label_event(run->state, example_id);

  ReceivedLabel received{stance, now_iso8601(), annotator, run->state.received.size() + 1};
  const json event = {{"type", "label"},
                      {"seq", received.seq},
                      {"run_id", run_id},
                      {"example_id", example_id},
                      {"label", to_int(stance)},
                      {"submitted_at", received.submitted_at},
                      {"annotator", annotator}};
  append_durable(run->dir / kEvents, event.dump());
  run->state.received.emplace(example_id, std::move(received));
  return {run->state.labeled(), run->state.remaining(), run->state.queue.size()};
}

RunResult LabelService::finalize(const std::string& run_id, bool force) {
  const auto run = find(run_id);
  std::lock_guard lock(run->mutex);
  auto& state = run->state;
  if (state.phase == RunPhase::kDone) return *state.result;
  if (state.phase != RunPhase::kAwaitingLabels && state.phase != RunPhase::kTraining)
    throw Error(ErrorCode::kWrongPhase, "run '" + run_id + "' cannot be finalized in phase " +
                                            std::string(phase_name(state.phase)));
  if (state.remaining() > 0 && !force)
    throw Error(ErrorCode::kWrongPhase, "run '" + run_id + "' still has " +
                                            std::to_string(state.remaining()) +
                                            " unlabelled items; pass force to finalize anyway");

  // Manual rows follow the plan's train-split order, as in the batch harness.
  std::vector<std::string> manual_ids;
  std::vector<Stance> manual_labels;
  for (const auto& id : run->plan.manual_ids) {
    const auto it = state.received.find(id);
    if (it == state.received.end()) continue;
    manual_ids.push_back(id);
    manual_labels.push_back(it->second.label);
  }

  const auto previous = state.phase;
  state.phase = RunPhase::kTraining;
  RunResult result;
  try {
    const auto outcome = train_and_evaluate(run->question, run->plan, manual_ids, manual_labels,
                                            state.spec.train, state.spec.soft_pseudo);
    result.metrics = outcome.metrics;
    result.n_manual = outcome.n_manual;
    result.n_pseudo = outcome.n_pseudo;
    result.n_synth = outcome.n_synth;
    result.single_class = outcome.single_class;
    result.forced = state.remaining() > 0;
    const json event = {{"type", "finalize"}, {"run_id", run_id}, {"result", to_json(result)}};
    append_durable(run->dir / kEvents, event.dump());
  } catch (...) {
    state.phase = previous;
    throw;
  }
  write_durable(run->dir / kResult, to_json(result).dump(2) + "\n");
  state.result = result;
  state.phase = RunPhase::kDone;
  return result;
}

RunResult LabelService::metrics(const std::string& run_id) const {
  const auto run = find(run_id);
  std::lock_guard lock(run->mutex);
  if (!run->state.result)
    throw Error(ErrorCode::kNotFinalized, "run '" + run_id + "' has not been finalized");
  return *run->state.result;
}

std::pair<RunSpec, QuestionInput> parse_create_request(const json& body) {
  try {
    auto spec = spec_from_json(body);
    std::vector<std::filesystem::path> paths;
    for (const char* key : {"dataset", "embeddings", "synth", "synth_embeddings"}) {
      paths.emplace_back(body.at(key).get<std::string>());
      if (!std::filesystem::is_regular_file(paths.back()))
        throw Error(ErrorCode::kInvalidArgument,
                    std::string(key) + " file not found: " + paths.back().string());
    }
    auto input = load_question_input(paths[0], paths[1], paths[2], paths[3]);
    return {std::move(spec), std::move(input)};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("invalid create request: ") + e.what());
  }
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMalformedRecord:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kZeroVector:
    case ErrorCode::kUnbalanced:
    case ErrorCode::kCorruptFile:
      return 400;
    case ErrorCode::kUnauthorized: return 401;
    case ErrorCode::kUnknownRun:
    case ErrorCode::kUnknownExample:
      return 404;
    case ErrorCode::kDuplicateRun:
    case ErrorCode::kAlreadyLabeled:
    case ErrorCode::kWrongPhase:
    case ErrorCode::kNotFinalized:
      return 409;
    case ErrorCode::kEmptyPool: return 422;
    case ErrorCode::kEndpoint: return 502;
    default: return 500;
  }
}

}  // namespace sqbc
