#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "sqbc/harness.hpp"

namespace sqbc::fixtures {

// The five held-out X-Stance questions with their 60/40 per-class counts.
// `split_seed` is a seed under which the uniform split of the generated
// fixture reproduces these counts exactly.
struct BenchmarkQuestion {
  std::string question_id;
  std::string german;
  std::string english;
  std::size_t favor_train;
  std::size_t against_train;
  std::size_t favor_test;
  std::size_t against_test;
  std::uint64_t split_seed;

  std::size_t favor() const { return favor_train + favor_test; }
  std::size_t against() const { return against_train + against_test; }
  std::size_t total() const { return favor() + against(); }
};

const std::array<BenchmarkQuestion, 5>& benchmark_questions();

// Two isotropic Gaussian classes around a shared offset direction:
// Favor ~ N(offset*e1 + separation/2*e0, noise^2 I), Against mirrored on e0.
struct GaussianSpec {
  std::size_t dim = 16;
  double separation = 1.0;
  double noise = 0.5;
  double offset = 2.0;
};

// A labelled question of `favor` + `against` comments in shuffled order with
// Gaussian embeddings, plus a balanced synthetic set of `m_synth` samples
// drawn from the same class distributions.
QuestionInput gaussian_question(const std::string& question_id, const std::string& question_text,
                                std::size_t favor, std::size_t against, std::size_t m_synth,
                                const GaussianSpec& spec, std::uint64_t seed);

// Fixture for one benchmark question (ids match write_xstance_fixture).
QuestionInput benchmark_question(std::size_t index, std::size_t m_synth = 40,
                                 const GaussianSpec& spec = {});

// X-Stance style JSONL with all five questions in German, French copies of
// some records and one unrelated German question.
void write_xstance_fixture(const std::filesystem::path& path);

// Writes dataset, embeddings, synthetic set and a sweep.toml for the five
// fixture questions into `dir`.
void write_demo_workspace(const std::filesystem::path& dir, std::size_t m_synth = 40);

}  // namespace sqbc::fixtures
