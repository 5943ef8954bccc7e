#include "sqbc/embedding.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <future>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <openssl/evp.h>
#include <unistd.h>

#include "http_util.hpp"
#include "sqbc/error.hpp"

namespace sqbc {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'Q', 'B', 'C', 'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 32;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_floats(std::string& out, std::span<const float> values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<float> get_floats(const unsigned char* p, std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p + 4 * i, 4)));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Write to a unique temporary in the same directory, then rename over the
// target so readers never observe a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  static std::atomic<std::uint64_t> counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename into " + path.string());
  }
}

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kDimensionMismatch,
                "cosine of vectors with dimensions " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0)
    throw Error(ErrorCode::kZeroVector, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kIo, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

void check_vector(std::span<const float> v, const std::string& what) {
  bool nonzero = false;
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFinite, what + " has a non-finite entry");
    if (x != 0.0f) nonzero = true;
  }
  if (!nonzero) throw Error(ErrorCode::kZeroVector, what + " is an all-zero vector");
}

std::optional<std::vector<float>> read_cached(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto bytes = buf.str();
  if (bytes.size() < 8) return std::nullopt;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto dim = get_le(p, 8);
  if (bytes.size() != 8 + 4 * dim) return std::nullopt;
  return get_floats(p + 8, dim);
}

void write_cached(const std::filesystem::path& path, std::span<const float> v) {
  std::string bytes;
  put_u64(bytes, v.size());
  put_floats(bytes, v);
  write_atomic(path, bytes);
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> example_ids, std::size_t dim,
                                 std::vector<float> data)
    : ids_(std::move(example_ids)), dim_(dim), data_(std::move(data)) {
  if (data_.size() != ids_.size() * dim_)
    throw Error(ErrorCode::kDimensionMismatch,
                "matrix payload of " + std::to_string(data_.size()) + " values does not match " +
                    std::to_string(ids_.size()) + " x " + std::to_string(dim_));
  if (!ids_.empty() && dim_ == 0)
    throw Error(ErrorCode::kDimensionMismatch, "embedding dimension must be positive");
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second)
      throw Error(ErrorCode::kInvalidArgument, "duplicate embedding id '" + ids_[i] + "'");
    check_vector(row(i), "embedding row '" + ids_[i] + "'");
  }
}

EmbeddingMatrix EmbeddingMatrix::from_rows(std::vector<std::string> example_ids,
                                           const std::vector<std::vector<float>>& rows) {
  if (rows.size() != example_ids.size())
    throw Error(ErrorCode::kInvalidArgument, "row count differs from id count");
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  std::vector<float> data;
  data.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim)
      throw Error(ErrorCode::kDimensionMismatch,
                  "embedding rows of dimension " + std::to_string(dim) + " and " +
                      std::to_string(r.size()));
    data.insert(data.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(std::move(example_ids), dim, std::move(data));
}

std::optional<std::size_t> EmbeddingMatrix::index_of(const std::string& id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

EmbeddingMatrix EmbeddingMatrix::select(std::span<const std::string> ids) const {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < ids_.size(); ++i) index.emplace(ids_[i], i);
  std::vector<float> data;
  data.reserve(ids.size() * dim_);
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end())
      throw Error(ErrorCode::kInvalidArgument, "no embedding for example '" + id + "'");
    const auto r = row(it->second);
    data.insert(data.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(std::vector<std::string>(ids.begin(), ids.end()), dim_,
                         std::move(data));
}

void EmbeddingMatrix::require_ids(std::span<const std::string> ids) const {
  std::unordered_set<std::string_view> have(ids_.begin(), ids_.end());
  for (const auto& id : ids)
    if (!have.contains(id))
      throw Error(ErrorCode::kInvalidArgument, "no embedding for example '" + id + "'");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return cosine_impl(a, b);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  return cosine_impl(a, b);
}

std::filesystem::path ids_sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".ids";
  return p;
}

void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::string bytes(kMagic.begin(), kMagic.end());
  put_u32(bytes, kVersion);
  put_u32(bytes, 0);
  put_u64(bytes, m.rows());
  put_u64(bytes, m.dim());
  put_floats(bytes, m.data());

  std::string ids;
  for (const auto& id : m.example_ids()) {
    if (id.find_first_of("\r\n") != std::string::npos)
      throw Error(ErrorCode::kInvalidArgument, "example id contains a line break");
    ids += id;
    ids += '\n';
  }
  write_atomic(path, bytes);
  write_atomic(ids_sidecar(path), ids);
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < kHeaderBytes || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw Error(ErrorCode::kCorruptFile, path.string() + ": not an embedding matrix file");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto version = get_le(p + 8, 4);
  if (version != kVersion)
    throw Error(ErrorCode::kCorruptFile,
                path.string() + ": unsupported version " + std::to_string(version));
  const auto rows = get_le(p + 16, 8);
  const auto dim = get_le(p + 24, 8);
  const auto payload = bytes.size() - kHeaderBytes;
  // Compare without overflowing on a corrupt header.
  const bool fits = rows == 0 || dim <= payload / 4 / rows;
  if (!fits || payload != rows * dim * 4)
    throw Error(ErrorCode::kCorruptFile,
                path.string() + ": payload length mismatch (header declares " +
                    std::to_string(rows) + " x " + std::to_string(dim) + ", found " +
                    std::to_string(payload) + " bytes)");

  std::vector<std::string> ids;
  {
    std::ifstream in(ids_sidecar(path));
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + ids_sidecar(path).string());
    std::string line;
    while (std::getline(in, line)) ids.push_back(line);
  }
  if (ids.size() != rows)
    throw Error(ErrorCode::kCorruptFile,
                path.string() + ": id sidecar lists " + std::to_string(ids.size()) +
                    " ids for " + std::to_string(rows) + " rows");
  return EmbeddingMatrix(std::move(ids), dim, get_floats(p + kHeaderBytes, rows * dim));
}

HttpEncoder::HttpEncoder(EncoderEndpoint endpoint)
    : endpoint_(std::move(endpoint)), token_(detail::env_value("SQBC_ENCODER_TOKEN")) {}

std::vector<std::vector<float>> HttpEncoder::embed(std::span<const std::string> texts) {
  const auto target = detail::parse_base_url(endpoint_.base_url);
  const std::vector<std::string> batch(texts.begin(), texts.end());
  std::vector<std::vector<float>> out;
  try {
    if (endpoint_.wire == EncoderWire::kNative) {
      const nlohmann::json body = {{"model", endpoint_.model_name}, {"texts", batch}};
      const auto reply = detail::post_json(target, "/embed", body, endpoint_.timeout, token_);
      out = reply.at("vectors").get<std::vector<std::vector<float>>>();
    } else {
      const nlohmann::json body = {{"model", endpoint_.model_name}, {"input", batch}};
      const auto reply =
          detail::post_json(target, "/v1/embeddings", body, endpoint_.timeout, token_);
      const auto& data = reply.at("data");
      out.resize(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto index = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
        if (index >= out.size())
          throw Error(ErrorCode::kEndpoint, "embedding index out of range");
        out[index] = data[i].at("embedding").get<std::vector<float>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kEndpoint, std::string("unexpected encoder reply: ") + e.what());
  }
  if (out.size() != texts.size())
    throw Error(ErrorCode::kEndpoint, "encoder returned " + std::to_string(out.size()) +
                                          " vectors for " + std::to_string(texts.size()) +
                                          " texts");
  return out;
}

std::string embedding_text(const Example& example) {
  return example.question_text + " [SEP] " + example.comment_text;
}

EmbeddingMatrix embed_examples(EncoderClient& client, const std::string& model_name,
                               std::span<const Example> examples,
                               const std::filesystem::path& cache_dir, std::size_t max_batch,
                               std::size_t parallelism, EmbedStats* stats) {
  if (max_batch == 0) throw Error(ErrorCode::kInvalidArgument, "max_batch must be >= 1");
  parallelism = std::max<std::size_t>(parallelism, 1);
  std::filesystem::create_directories(cache_dir);

  std::vector<std::vector<float>> rows(examples.size());
  std::vector<std::filesystem::path> cache_paths(examples.size());
  std::vector<std::size_t> missing;
  std::unordered_map<std::string, std::size_t> first_miss;  // dedupe identical texts
  std::vector<std::pair<std::size_t, std::size_t>> aliases;
  std::vector<std::string> texts;

  EmbedStats local;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto text = embedding_text(examples[i]);
    cache_paths[i] = cache_dir / (sha256_hex(model_name + '\0' + text) + ".f32");
    if (auto cached = read_cached(cache_paths[i])) {
      rows[i] = std::move(*cached);
      ++local.cache_hits;
      continue;
    }
    auto [it, inserted] = first_miss.try_emplace(text, i);
    if (!inserted) {
      aliases.emplace_back(i, it->second);
      continue;
    }
    missing.push_back(i);
    texts.push_back(std::move(text));
  }

  // Batches are independent requests; results land at their own offsets.
  std::vector<std::pair<std::size_t, std::size_t>> batches;
  for (std::size_t start = 0; start < texts.size(); start += max_batch)
    batches.emplace_back(start, std::min(texts.size(), start + max_batch));
  std::vector<std::vector<std::vector<float>>> results(batches.size());
  for (std::size_t wave = 0; wave < batches.size(); wave += parallelism) {
    std::vector<std::future<void>> inflight;
    for (std::size_t b = wave; b < std::min(batches.size(), wave + parallelism); ++b) {
      inflight.push_back(std::async(std::launch::async, [&, b] {
        const auto [lo, hi] = batches[b];
        results[b] = client.embed(std::span<const std::string>(texts).subspan(lo, hi - lo));
        if (results[b].size() != hi - lo)
          throw Error(ErrorCode::kEndpoint, "encoder returned the wrong number of vectors");
      }));
    }
    for (auto& f : inflight) f.get();
  }
  local.texts_sent = texts.size();

  for (std::size_t b = 0; b < batches.size(); ++b)
    for (std::size_t j = 0; j < results[b].size(); ++j) {
      const auto i = missing[batches[b].first + j];
      rows[i] = std::move(results[b][j]);
    }
  for (const auto& [i, source] : aliases) rows[i] = rows[source];

  // Validate before anything is cached so a bad batch never poisons the cache.
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim)
      throw Error(ErrorCode::kDimensionMismatch,
                  "encoder dimensionality changed from " + std::to_string(dim) + " to " +
                      std::to_string(rows[i].size()) + " at example '" + examples[i].id + "'");
    check_vector(rows[i], "embedding of example '" + examples[i].id + "'");
  }
  for (const auto i : missing) write_cached(cache_paths[i], rows[i]);

  if (stats) *stats = local;
  std::vector<std::string> ids;
  ids.reserve(examples.size());
  for (const auto& e : examples) ids.push_back(e.id);
  return EmbeddingMatrix::from_rows(std::move(ids), rows);
}

EmbeddingMatrix embed_examples(const EncoderEndpoint& endpoint,
                               std::span<const Example> examples,
                               const std::filesystem::path& cache_dir, EmbedStats* stats) {
  HttpEncoder client(endpoint);
  return embed_examples(client, endpoint.model_name, examples, cache_dir, endpoint.max_batch,
                        endpoint.parallelism, stats);
}

}  // namespace sqbc
