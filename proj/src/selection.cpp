#include "sqbc/selection.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "sqbc/error.hpp"
#include "sqbc/random.hpp"

namespace sqbc {

int SelectionResult::score_of(const std::string& id) const {
  const auto it = std::find(unlabeled_ids.begin(), unlabeled_ids.end(), id);
  if (it == unlabeled_ids.end())
    throw Error(ErrorCode::kInvalidArgument, "id '" + id + "' is not in the selection");
  return scores.scores[static_cast<std::size_t>(it - unlabeled_ids.begin())];
}

NeighborTable knn_indices(const EmbeddingMatrix& unlabeled, const EmbeddingMatrix& labeled,
                          std::size_t k) {
  if (k < 1 || k > labeled.rows())
    throw Error(ErrorCode::kInvalidArgument,
                "k = " + std::to_string(k) + " outside [1, " + std::to_string(labeled.rows()) +
                    "]");
  if (unlabeled.rows() > 0 && unlabeled.dim() != labeled.dim())
    throw Error(ErrorCode::kDimensionMismatch,
                "unlabelled dimension " + std::to_string(unlabeled.dim()) +
                    " differs from labelled dimension " + std::to_string(labeled.dim()));

  NeighborTable table{unlabeled.rows(), k, std::vector<std::size_t>(unlabeled.rows() * k)};
  std::vector<double> similarity(labeled.rows());
  std::vector<std::size_t> order(labeled.rows());
  for (std::size_t n = 0; n < unlabeled.rows(); ++n) {
    const auto u = unlabeled.row(n);
    for (std::size_t m = 0; m < labeled.rows(); ++m)
      similarity[m] = cosine_similarity(u, labeled.row(m));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (similarity[a] != similarity[b]) return similarity[a] > similarity[b];
                        return a < b;
                      });
    std::copy_n(order.begin(), k, table.indices.begin() + static_cast<std::ptrdiff_t>(n * k));
  }
  return table;
}

ScoreVector score(std::span<const Stance> labels, const NeighborTable& nn) {
  ScoreVector out{std::vector<int>(nn.rows, 0), static_cast<int>(nn.k)};
  for (std::size_t n = 0; n < nn.rows; ++n)
    for (const auto m : nn.row(n)) {
      if (m >= labels.size())
        throw Error(ErrorCode::kInvalidArgument,
                    "neighbour index " + std::to_string(m) + " out of range");
      out.scores[n] += to_int(labels[m]);
    }
  return out;
}

Partition select(const ScoreVector& scores, int kappa) {
  if (scores.scores.empty())
    throw Error(ErrorCode::kInvalidArgument, "cannot select from an empty score vector");
  if (kappa < 0) throw Error(ErrorCode::kInvalidArgument, "kappa must be >= 0");
  const auto [lo, hi] = std::minmax_element(scores.scores.begin(), scores.scores.end());
  const long long lower = static_cast<long long>(*lo) + kappa;
  const long long upper = static_cast<long long>(*hi) - kappa;
  Partition out;
  for (std::size_t n = 0; n < scores.scores.size(); ++n) {
    const long long s = scores.scores[n];
    (lower < s && s < upper ? out.chosen : out.not_chosen).push_back(n);
  }
  return out;
}

PseudoLabels pseudo_labels(const ScoreVector& scores, int k,
                           std::span<const std::size_t> not_chosen) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  PseudoLabels out;
  out.labels.reserve(not_chosen.size());
  out.fractions.reserve(not_chosen.size());
  for (const auto n : not_chosen) {
    const int s = scores.scores.at(n);
    out.fractions.push_back(static_cast<double>(s) / k);
    // s / k >= 1/2, kept in integers so the boundary is exact.
    out.labels.push_back(2 * s >= k ? Stance::kFavor : Stance::kAgainst);
    if (2 * s == k) ++out.ties;
  }
  return out;
}

SelectionResult sqbc(const EmbeddingMatrix& unlabeled, const SynthDataset& synth,
                     const EmbeddingMatrix& synth_embeddings, int kappa) {
  if (unlabeled.rows() == 0)
    throw Error(ErrorCode::kInvalidArgument, "no unlabelled examples to select from");
  if (synth_embeddings.rows() != synth.m_total())
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic embeddings have " + std::to_string(synth_embeddings.rows()) +
                    " rows for " + std::to_string(synth.m_total()) + " synthetic examples");

  std::unordered_map<std::string_view, Stance> label_of;
  for (const auto& e : synth.examples()) label_of.emplace(e.id, *e.label);
  std::vector<Stance> labels;
  labels.reserve(synth_embeddings.rows());
  for (const auto& id : synth_embeddings.example_ids()) {
    const auto it = label_of.find(id);
    if (it == label_of.end())
      throw Error(ErrorCode::kInvalidArgument,
                  "synthetic embedding '" + id + "' has no matching synthetic example");
    labels.push_back(it->second);
  }

  const auto k = synth.k();
  const auto nn = knn_indices(unlabeled, synth_embeddings, k);
  SelectionResult result;
  result.scores = score(labels, nn);
  const auto partition = select(result.scores, kappa);
  auto pseudo = pseudo_labels(result.scores, static_cast<int>(k), partition.not_chosen);

  const auto& ids = unlabeled.example_ids();
  result.unlabeled_ids = ids;
  for (const auto n : partition.chosen) result.chosen_ids.push_back(ids[n]);
  for (const auto n : partition.not_chosen) result.not_chosen_ids.push_back(ids[n]);
  result.pseudo_labels = std::move(pseudo.labels);
  result.pseudo_fractions = std::move(pseudo.fractions);
  result.pseudo_ties = pseudo.ties;
  result.kappa = kappa;
  result.k = static_cast<int>(k);
  return result;
}

IdPartition random_select(std::span<const std::string> ids, std::size_t budget,
                          std::uint64_t seed) {
  if (budget > ids.size())
    throw Error(ErrorCode::kInvalidArgument,
                "budget " + std::to_string(budget) + " exceeds " + std::to_string(ids.size()) +
                    " candidates");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<bool> take(ids.size(), false);
  for (std::size_t i = 0; i < budget; ++i) take[order[i]] = true;
  IdPartition out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    (take[i] ? out.chosen : out.not_chosen).push_back(ids[i]);
  return out;
}

}  // namespace sqbc
