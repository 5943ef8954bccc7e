#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sqbc/dataset.hpp"
#include "sqbc/embedding.hpp"

namespace sqbc {

// Dense double-precision design matrix for the classification head.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

FeatureMatrix to_features(const EmbeddingMatrix& m);
// Each row scaled to unit Euclidean length.
FeatureMatrix normalized_features(const EmbeddingMatrix& m);

struct HeadParams {
  std::vector<double> weights;
  double bias = 0.0;

  bool operator==(const HeadParams&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

struct TrainedHead {
  HeadParams params;
  std::vector<double> loss_history;  // loss before each update, then the final loss
  bool single_class = false;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;  // d weight partials, then the bias partial
};

// Mean binary cross-entropy of sigmoid(w.x + b) against targets in [0, 1],
// plus l2 * |w|^2, and its analytic gradient.
LossGradient loss_and_gradient(const HeadParams& params, const FeatureMatrix& x,
                               std::span<const double> targets, double l2);

// Full-batch gradient descent from w = 0, b = 0.
TrainedHead train_head(const FeatureMatrix& x, std::span<const double> targets,
                       const TrainConfig& cfg);
TrainedHead train_head(const FeatureMatrix& x, std::span<const Stance> labels,
                       const TrainConfig& cfg);
TrainedHead train_head(const EmbeddingMatrix& x, std::span<const Stance> labels,
                       const TrainConfig& cfg);

struct Predictions {
  std::vector<Stance> labels;         // Favor iff probability >= 0.5
  std::vector<double> probabilities;  // P(Favor)
};

Predictions predict(const HeadParams& params, const FeatureMatrix& x);
Predictions predict(const HeadParams& params, const EmbeddingMatrix& x);

struct Metrics {
  double accuracy = 0.0;
  double f1_favor = 0.0;
  double f1_against = 0.0;
  double macro_f1 = 0.0;
  // confusion[truth][prediction], indexed by stance code.
  std::array<std::array<std::size_t, 2>, 2> confusion{};

  std::size_t count() const {
    return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1];
  }
  bool operator==(const Metrics&) const = default;
};

Metrics compute_metrics(std::span<const Stance> predicted, std::span<const Stance> truth);

void save_head(const HeadParams& params, const TrainConfig& cfg,
               const std::filesystem::path& path);
HeadParams load_head(const std::filesystem::path& path);

}  // namespace sqbc
