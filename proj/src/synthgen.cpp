#include "sqbc/synthgen.hpp"

#include <unordered_set>

#include "http_util.hpp"
#include "sqbc/error.hpp"

namespace sqbc {

SynthDataset::SynthDataset(QuestionDataset data) : data_(std::move(data)) {
  validate(data_);
  std::size_t favor = 0, against = 0;
  std::unordered_set<std::string> seen;
  for (const auto& e : data_.examples) {
    if (e.origin != Origin::kSynthetic)
      throw Error(ErrorCode::kInvalidArgument,
                  "example '" + e.id + "' has origin '" + std::string(origin_name(e.origin)) +
                      "', expected 'synthetic'");
    if (!e.label)
      throw Error(ErrorCode::kInvalidArgument, "synthetic example '" + e.id + "' has no label");
    (*e.label == Stance::kFavor ? favor : against)++;
    if (!seen.insert(normalize_whitespace(e.comment_text)).second)
      throw Error(ErrorCode::kInvalidArgument,
                  "synthetic example '" + e.id + "' duplicates an earlier comment");
  }
  if (favor + against < 2)
    throw Error(ErrorCode::kUnbalanced, "a synthetic set needs at least one example per stance");
  if (favor != against)
    throw Error(ErrorCode::kUnbalanced, "synthetic set has " + std::to_string(favor) +
                                            " favor and " + std::to_string(against) +
                                            " against examples");
}

std::string build_prompt(std::string_view question_text, Stance stance) {
  if (question_text.empty())
    throw Error(ErrorCode::kInvalidArgument, "question text must not be empty");
  std::string prompt =
      "A user in a discussion forum is debating other users about the following question: ";
  prompt += question_text;
  prompt += stance == Stance::kFavor ? " The person is in favor" : " The person is not in favor";
  prompt +=
      " about the topic in question. What would the person write? Write from the persons "
      "first person perspective.";
  return prompt;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

HttpChatClient::HttpChatClient(ChatEndpoint endpoint)
    : endpoint_(std::move(endpoint)), token_(detail::env_value("SQBC_CHAT_TOKEN")) {}

std::string HttpChatClient::complete(const std::string& prompt,
                                     std::optional<std::uint64_t> seed) {
  nlohmann::json body = {
      {"model", endpoint_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", endpoint_.temperature},
      {"max_tokens", endpoint_.max_tokens},
  };
  if (seed) body["seed"] = *seed;
  const auto reply = detail::post_json(detail::parse_base_url(endpoint_.base_url),
                                       "/v1/chat/completions", body, endpoint_.timeout, token_);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kEndpoint, std::string("unexpected chat reply: ") + e.what());
  }
}

SynthDataset generate_synthetic(const SynthConfig& cfg, ChatClient& client) {
  if (cfg.m_total < 2 || cfg.m_total % 2 != 0)
    throw Error(ErrorCode::kInvalidArgument,
                "M must be even and >= 2, got " + std::to_string(cfg.m_total));
  if (cfg.endpoint.temperature < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");

  std::uint64_t request_index = 0;
  auto request = [&](const std::string& prompt) {
    for (std::size_t attempt = 0;; ++attempt) {
      const auto seed = cfg.seed ? std::optional(*cfg.seed + request_index) : std::nullopt;
      ++request_index;
      try {
        return client.complete(prompt, seed);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEndpoint || attempt >= cfg.max_retries) throw;
      }
    }
  };

  QuestionDataset out{cfg.question_id, cfg.question_text, {}};
  std::unordered_set<std::string> seen;
  for (const Stance stance : {Stance::kFavor, Stance::kAgainst}) {
    const auto prompt = build_prompt(cfg.question_text, stance);
    for (std::size_t slot = 0; slot < cfg.m_total / 2; ++slot) {
      std::size_t duplicates = 0;
      for (;;) {
        const auto completion = request(prompt);
        auto key = normalize_whitespace(completion);
        if (key.empty()) throw Error(ErrorCode::kEndpoint, "endpoint returned an empty completion");
        if (seen.insert(key).second) {
          Example e;
          e.id = cfg.question_id + "-synth-" + std::to_string(out.examples.size() + 1);
          e.question_id = cfg.question_id;
          e.question_text = cfg.question_text;
          e.comment_text = std::move(key);
          e.label = stance;
          e.origin = Origin::kSynthetic;
          e.language = cfg.language;
          out.examples.push_back(std::move(e));
          break;
        }
        if (++duplicates > cfg.max_retries)
          throw Error(ErrorCode::kDuplicateBudget,
                      "endpoint kept returning duplicate comments after " +
                          std::to_string(cfg.max_retries) + " retries");
      }
    }
  }
  return SynthDataset(std::move(out));
}

SynthDataset generate_synthetic(const SynthConfig& cfg) {
  HttpChatClient client(cfg.endpoint);
  return generate_synthetic(cfg, client);
}

SynthDataset load_synthetic(const std::filesystem::path& path) {
  auto groups = group_by_question(read_examples(path));
  if (groups.size() != 1)
    throw Error(ErrorCode::kInvalidArgument,
                path.string() + " holds " + std::to_string(groups.size()) +
                    " questions, expected exactly one");
  return SynthDataset(std::move(groups.front()));
}

void save_synthetic(const SynthDataset& synth, const std::filesystem::path& path) {
  write_examples(synth.examples(), path);
}

}  // namespace sqbc
