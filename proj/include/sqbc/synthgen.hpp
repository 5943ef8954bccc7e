#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "sqbc/dataset.hpp"

namespace sqbc {

struct ChatEndpoint {
  std::string base_url;
  std::string model;
  double temperature = 0.7;
  int max_tokens = 256;
  std::chrono::milliseconds timeout{60000};
};

struct SynthConfig {
  std::string question_text;
  std::string question_id = "synth";
  std::string language = "de";
  std::size_t m_total = 200;  // even; half per stance
  ChatEndpoint endpoint;
  std::optional<std::uint64_t> seed;
  std::size_t max_retries = 5;
};

// A question dataset of synthetic comments, exactly half Favor and half
// Against, no duplicate comments. The constructor enforces this.
class SynthDataset {
 public:
  SynthDataset() = default;
  explicit SynthDataset(QuestionDataset data);

  const QuestionDataset& data() const { return data_; }
  const std::vector<Example>& examples() const { return data_.examples; }
  std::size_t m_total() const { return data_.examples.size(); }
  // Neighbour count used by the selector: one class worth of samples.
  std::size_t k() const { return m_total() / 2; }

 private:
  QuestionDataset data_;
};

std::string build_prompt(std::string_view question_text, Stance stance);

// Collapses whitespace runs and trims; the key used to detect duplicates.
std::string normalize_whitespace(std::string_view text);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the first choice's message content.
  virtual std::string complete(const std::string& prompt, std::optional<std::uint64_t> seed) = 0;
};

// POST {base_url}/v1/chat/completions with a single user message.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(ChatEndpoint endpoint);
  std::string complete(const std::string& prompt, std::optional<std::uint64_t> seed) override;

 private:
  ChatEndpoint endpoint_;
  std::optional<std::string> token_;
};

// M/2 Favor completions followed by M/2 Against completions.
SynthDataset generate_synthetic(const SynthConfig& cfg, ChatClient& client);
SynthDataset generate_synthetic(const SynthConfig& cfg);

SynthDataset load_synthetic(const std::filesystem::path& path);
void save_synthetic(const SynthDataset& synth, const std::filesystem::path& path);

}  // namespace sqbc
