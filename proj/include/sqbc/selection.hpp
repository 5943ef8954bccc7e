#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sqbc/dataset.hpp"
#include "sqbc/embedding.hpp"
#include "sqbc/synthgen.hpp"

namespace sqbc {

// Row n holds the k labelled rows most similar to unlabelled row n, by
// descending cosine similarity; exact ties go to the lower labelled index.
struct NeighborTable {
  std::size_t rows = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;

  std::span<const std::size_t> row(std::size_t n) const { return {indices.data() + n * k, k}; }
};

struct ScoreVector {
  std::vector<int> scores;  // s(n) in [0, k]
  int k = 0;

  bool operator==(const ScoreVector&) const = default;
};

struct Partition {
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> not_chosen;

  bool operator==(const Partition&) const = default;
};

struct PseudoLabels {
  std::vector<Stance> labels;
  std::vector<double> fractions;  // s(n) / k
  std::size_t ties = 0;           // fraction exactly 0.5, resolved to Favor
};

struct SelectionResult {
  std::vector<std::string> unlabeled_ids;
  std::vector<std::string> chosen_ids;
  std::vector<std::string> not_chosen_ids;
  ScoreVector scores;  // aligned with unlabeled_ids
  std::vector<Stance> pseudo_labels;      // aligned with not_chosen_ids
  std::vector<double> pseudo_fractions;   // aligned with not_chosen_ids
  std::size_t pseudo_ties = 0;
  int kappa = 0;
  int k = 0;

  int score_of(const std::string& id) const;
};

NeighborTable knn_indices(const EmbeddingMatrix& unlabeled, const EmbeddingMatrix& labeled,
                          std::size_t k);

ScoreVector score(std::span<const Stance> labels, const NeighborTable& nn);

// Indices n with  min s + kappa < s(n) < max s - kappa  (observed min/max,
// strict bounds). Both lists keep input order.
Partition select(const ScoreVector& scores, int kappa);

// Favor iff s(n) / k >= 0.5.
PseudoLabels pseudo_labels(const ScoreVector& scores, int k,
                           std::span<const std::size_t> not_chosen);

// Full selector: neighbours among the synthetic set with k = M/2, scoring,
// kappa-gated choice and pseudo-labels for the rest.
SelectionResult sqbc(const EmbeddingMatrix& unlabeled, const SynthDataset& synth,
                     const EmbeddingMatrix& synth_embeddings, int kappa);

struct IdPartition {
  std::vector<std::string> chosen;
  std::vector<std::string> not_chosen;
};

// Uniform sample of `budget` ids without replacement; input order preserved.
IdPartition random_select(std::span<const std::string> ids, std::size_t budget,
                          std::uint64_t seed);

}  // namespace sqbc
