#pragma once

// Brute-force reference for the synthetic-neighbour selector, written
// without the library's selection code: full similarity matrix, k rounds of
// linear max-search per row, naive min/max and a direct band test.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sqbc/embedding.hpp"
#include "sqbc/random.hpp"
#include "sqbc/synthgen.hpp"
#include "support.hpp"

namespace oracle {

struct Outcome {
  std::vector<int> scores;
  std::vector<std::string> chosen;
  std::vector<std::string> not_chosen;
  std::vector<int> pseudo;  // 0/1 per not-chosen id
};

inline double similarity(const sqbc::EmbeddingMatrix& a, std::size_t i,
                         const sqbc::EmbeddingMatrix& b, std::size_t j) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t t = 0; t < a.dim(); ++t) {
    const double x = a.data()[i * a.dim() + t];
    const double y = b.data()[j * b.dim() + t];
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  double c = ab / (std::sqrt(aa) * std::sqrt(bb));
  if (c > 1) c = 1;
  if (c < -1) c = -1;
  return c;
}

inline Outcome run(const sqbc::EmbeddingMatrix& unlabeled, const sqbc::SynthDataset& synth,
                   const sqbc::EmbeddingMatrix& synth_emb, int kappa) {
  const std::size_t n_rows = unlabeled.rows();
  const std::size_t m_rows = synth_emb.rows();
  const std::size_t k = m_rows / 2;

  std::map<std::string, int> label_by_id;
  for (const auto& e : synth.examples()) label_by_id[e.id] = *e.label == sqbc::Stance::kFavor;

  std::vector<std::vector<double>> sim(n_rows, std::vector<double>(m_rows));
  for (std::size_t n = 0; n < n_rows; ++n)
    for (std::size_t m = 0; m < m_rows; ++m) sim[n][m] = similarity(unlabeled, n, synth_emb, m);

  Outcome out;
  for (std::size_t n = 0; n < n_rows; ++n) {
    std::vector<bool> used(m_rows, false);
    int s = 0;
    for (std::size_t round = 0; round < k; ++round) {
      std::size_t best = m_rows;
      for (std::size_t m = 0; m < m_rows; ++m) {
        if (used[m]) continue;
        if (best == m_rows || sim[n][m] > sim[n][best]) best = m;
      }
      used[best] = true;
      s += label_by_id.at(synth_emb.example_ids()[best]);
    }
    out.scores.push_back(s);
  }

  int lo = out.scores[0], hi = out.scores[0];
  for (int s : out.scores) {
    if (s < lo) lo = s;
    if (s > hi) hi = s;
  }
  for (std::size_t n = 0; n < n_rows; ++n) {
    const int s = out.scores[n];
    const auto& id = unlabeled.example_ids()[n];
    if (s > lo + kappa && s < hi - kappa) {
      out.chosen.push_back(id);
    } else {
      out.not_chosen.push_back(id);
      // fraction s/k at or above one half is Favor
      out.pseudo.push_back(static_cast<double>(s) / static_cast<double>(k) >= 0.5 ? 1 : 0);
    }
  }
  return out;
}

struct Instance {
  sqbc::EmbeddingMatrix unlabeled;
  sqbc::SynthDataset synth;
  sqbc::EmbeddingMatrix synth_emb;
  int kappa = 0;
};

// N <= 50, M <= 20 even, d <= 8, kappa in 0..5, small-integer entries with
// planted duplicate rows so that similarity ties are common.
inline Instance random_instance(sqbc::Rng& rng) {
  const std::size_t n = 1 + rng.below(50);
  const std::size_t m = 2 * (1 + rng.below(10));
  const std::size_t d = 1 + rng.below(8);
  auto u = testing::random_matrix(rng, "u", n, d);
  auto s = testing::random_matrix(rng, "s", m, d);

  auto u_data = u.data();
  auto s_data = s.data();
  for (std::size_t r = 0; r < m; ++r)
    if (rng.below(4) == 0) {
      const auto src = rng.below(m);
      std::copy_n(s_data.begin() + src * d, d, s_data.begin() + r * d);
    }
  for (std::size_t r = 0; r < n; ++r)
    if (rng.below(4) == 0) {
      const auto src = rng.below(m);
      std::copy_n(s_data.begin() + src * d, d, u_data.begin() + r * d);
    }
  Instance inst{sqbc::EmbeddingMatrix(u.example_ids(), d, u_data), {},
                sqbc::EmbeddingMatrix(s.example_ids(), d, s_data),
                static_cast<int>(rng.below(6))};
  inst.synth = testing::random_synth(rng, inst.synth_emb);
  return inst;
}

}  // namespace oracle
