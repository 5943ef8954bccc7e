#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqbc/dataset.hpp"

namespace sqbc {

// N x d row-major matrix of embeddings aligned with a list of example ids.
// Construction validates: entries finite, no all-zero row, ids unique.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::vector<std::string> example_ids, std::size_t dim,
                  std::vector<float> data);

  static EmbeddingMatrix from_rows(std::vector<std::string> example_ids,
                                   const std::vector<std::vector<float>>& rows);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<float>& data() const { return data_; }
  const std::vector<std::string>& example_ids() const { return ids_; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  std::optional<std::size_t> index_of(const std::string& id) const;

  // Rows for `ids`, in that order. Unknown ids are an error.
  EmbeddingMatrix select(std::span<const std::string> ids) const;

  // Rows for `ids` that are missing from the matrix raise kInvalidArgument;
  // this checks alignment with a dataset.
  void require_ids(std::span<const std::string> ids) const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

// dot(a, b) / (|a| |b|), computed in double and clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Binary layout: "SQBCEMB1", u32 version, u32 reserved, u64 rows, u64 dim,
// then rows*dim little-endian float32. Ids go to "<path>.ids", one per line.
void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix load_matrix(const std::filesystem::path& path);
std::filesystem::path ids_sidecar(const std::filesystem::path& path);

enum class EncoderWire { kNative, kOpenAI };

struct EncoderEndpoint {
  std::string base_url;
  std::string model_name;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_batch = 32;
  std::size_t parallelism = 1;
  EncoderWire wire = EncoderWire::kNative;
};

class EncoderClient {
 public:
  virtual ~EncoderClient() = default;
  // One vector per input text, same order.
  virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
};

// POST {base_url}/embed  {"model","texts"} -> {"vectors"}, or the
// /v1/embeddings shape. Sends SQBC_ENCODER_TOKEN as a bearer token when set.
class HttpEncoder final : public EncoderClient {
 public:
  explicit HttpEncoder(EncoderEndpoint endpoint);
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;

 private:
  EncoderEndpoint endpoint_;
  std::optional<std::string> token_;
};

// "question [SEP] comment"
std::string embedding_text(const Example& example);

struct EmbedStats {
  std::size_t cache_hits = 0;
  std::size_t texts_sent = 0;
};

// Embeds every example, consulting a per-text cache keyed by
// sha256(model_name, text). The client is only called for cache misses.
EmbeddingMatrix embed_examples(EncoderClient& client, const std::string& model_name,
                               std::span<const Example> examples,
                               const std::filesystem::path& cache_dir,
                               std::size_t max_batch = 32, std::size_t parallelism = 1,
                               EmbedStats* stats = nullptr);

EmbeddingMatrix embed_examples(const EncoderEndpoint& endpoint,
                               std::span<const Example> examples,
                               const std::filesystem::path& cache_dir,
                               EmbedStats* stats = nullptr);

}  // namespace sqbc
