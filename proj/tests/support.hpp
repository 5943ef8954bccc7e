#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include <doctest.h>

#include "sqbc/dataset.hpp"
#include "sqbc/embedding.hpp"
#include "sqbc/error.hpp"
#include "sqbc/random.hpp"
#include "sqbc/synthgen.hpp"

namespace testing {

// Runs fn and returns the code of the sqbc::Error it throws.
template <typename Fn>
sqbc::ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const sqbc::Error& e) {
    return e.code();
  }
  FAIL("expected an sqbc::Error");
  return sqbc::ErrorCode::kInvalidArgument;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sqbc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline sqbc::Example human(std::string id, std::string comment,
                           std::optional<sqbc::Stance> label = std::nullopt,
                           std::string qid = "q1", std::string question = "Q?") {
  sqbc::Example e;
  e.id = std::move(id);
  e.question_id = std::move(qid);
  e.question_text = std::move(question);
  e.comment_text = std::move(comment);
  e.label = label;
  return e;
}

// Random matrix with small-integer entries so exact similarity ties occur;
// all-zero rows are redrawn.
inline sqbc::EmbeddingMatrix random_matrix(sqbc::Rng& rng, const std::string& prefix,
                                           std::size_t rows, std::size_t dim, int range = 2) {
  std::vector<std::string> ids;
  std::vector<float> data;
  for (std::size_t r = 0; r < rows; ++r) {
    ids.push_back(prefix + std::to_string(r));
    std::vector<float> row(dim, 0.0f);
    bool nonzero = false;
    while (!nonzero) {
      for (auto& x : row) {
        x = static_cast<float>(static_cast<int>(rng.below(2 * range + 1)) - range);
        nonzero = nonzero || x != 0.0f;
      }
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return sqbc::EmbeddingMatrix(std::move(ids), dim, std::move(data));
}

// Balanced synthetic set of m examples aligned with `emb` rows; labels are
// assigned in a random order.
inline sqbc::SynthDataset random_synth(sqbc::Rng& rng, const sqbc::EmbeddingMatrix& emb) {
  const std::size_t m = emb.rows();
  std::vector<sqbc::Stance> labels;
  for (std::size_t i = 0; i < m; ++i)
    labels.push_back(i < m / 2 ? sqbc::Stance::kFavor : sqbc::Stance::kAgainst);
  rng.shuffle(std::span<sqbc::Stance>(labels));
  sqbc::QuestionDataset ds;
  ds.question_id = "synth";
  ds.question_text = "Q?";
  for (std::size_t i = 0; i < m; ++i) {
    auto e = human(emb.example_ids()[i], "synthetic comment " + std::to_string(i), labels[i],
                   "synth");
    e.origin = sqbc::Origin::kSynthetic;
    ds.examples.push_back(e);
  }
  return sqbc::SynthDataset(std::move(ds));
}

}  // namespace testing
