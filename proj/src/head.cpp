#include "sqbc/head.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "sqbc/error.hpp"
#include "sqbc/random.hpp"

namespace sqbc {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logit(const HeadParams& p, std::span<const double> x) {
  double z = p.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += p.weights[j] * x[j];
  return z;
}

void check_dims(const HeadParams& p, const FeatureMatrix& x) {
  if (p.weights.size() != x.dim)
    throw Error(ErrorCode::kDimensionMismatch,
                "head expects dimension " + std::to_string(p.weights.size()) + ", features have " +
                    std::to_string(x.dim));
}

}  // namespace

FeatureMatrix to_features(const EmbeddingMatrix& m) {
  return FeatureMatrix{m.rows(), m.dim(), std::vector<double>(m.data().begin(), m.data().end())};
}

FeatureMatrix normalized_features(const EmbeddingMatrix& m) {
  auto f = to_features(m);
  for (std::size_t i = 0; i < f.rows; ++i) {
    double norm = 0.0;
    for (const double v : f.row(i)) norm += v * v;
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < f.dim; ++j) f.data[i * f.dim + j] /= norm;
  }
  return f;
}

LossGradient loss_and_gradient(const HeadParams& params, const FeatureMatrix& x,
                               std::span<const double> targets, double l2) {
  check_dims(params, x);
  if (targets.size() != x.rows)
    throw Error(ErrorCode::kDimensionMismatch, "target count differs from row count");
  if (x.rows == 0) throw Error(ErrorCode::kInvalidArgument, "no training rows");

  LossGradient out;
  out.grad.assign(x.dim + 1, 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    const double z = logit(params, row);
    out.loss += softplus(z) - targets[i] * z;
    const double residual = sigmoid(z) - targets[i];
    for (std::size_t j = 0; j < x.dim; ++j) out.grad[j] += residual * row[j];
    out.grad[x.dim] += residual;
  }
  out.loss *= inv_n;
  for (auto& g : out.grad) g *= inv_n;
  for (std::size_t j = 0; j < x.dim; ++j) {
    out.loss += l2 * params.weights[j] * params.weights[j];
    out.grad[j] += 2.0 * l2 * params.weights[j];
  }
  return out;
}

TrainedHead train_head(const FeatureMatrix& x, std::span<const double> targets,
                       const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (!(cfg.l2 >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "l2 must be >= 0");
  if (x.rows == 0) throw Error(ErrorCode::kEmptyPool, "cannot train on zero rows");

  TrainedHead out;
  out.params.weights.assign(x.dim, 0.0);
  bool any_pos = false, any_neg = false;
  for (const double t : targets) {
    if (!(t >= 0.0 && t <= 1.0))
      throw Error(ErrorCode::kInvalidArgument, "training targets must lie in [0, 1]");
    any_pos |= t >= 0.5;
    any_neg |= t < 0.5;
  }
  out.single_class = !(any_pos && any_neg);

  out.loss_history.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const auto lg = loss_and_gradient(out.params, x, targets, cfg.l2);
    if (!std::isfinite(lg.loss))
      throw Error(ErrorCode::kNonFinite,
                  "training loss became non-finite at epoch " + std::to_string(epoch));
    out.loss_history.push_back(lg.loss);
    if (epoch == cfg.epochs) break;
    for (std::size_t j = 0; j < x.dim; ++j) out.params.weights[j] -= cfg.learning_rate * lg.grad[j];
    out.params.bias -= cfg.learning_rate * lg.grad[x.dim];
  }
  return out;
}

TrainedHead train_head(const FeatureMatrix& x, std::span<const Stance> labels,
                       const TrainConfig& cfg) {
  std::vector<double> targets;
  targets.reserve(labels.size());
  for (const auto s : labels) targets.push_back(to_int(s));
  return train_head(x, targets, cfg);
}

TrainedHead train_head(const EmbeddingMatrix& x, std::span<const Stance> labels,
                       const TrainConfig& cfg) {
  return train_head(to_features(x), labels, cfg);
}

Predictions predict(const HeadParams& params, const FeatureMatrix& x) {
  check_dims(params, x);
  Predictions out;
  out.labels.reserve(x.rows);
  out.probabilities.reserve(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double p = sigmoid(logit(params, x.row(i)));
    out.probabilities.push_back(p);
    out.labels.push_back(p >= 0.5 ? Stance::kFavor : Stance::kAgainst);
  }
  return out;
}

Predictions predict(const HeadParams& params, const EmbeddingMatrix& x) {
  return predict(params, to_features(x));
}

Metrics compute_metrics(std::span<const Stance> predicted, std::span<const Stance> truth) {
  if (predicted.size() != truth.size())
    throw Error(ErrorCode::kDimensionMismatch, "prediction and truth lengths differ");
  if (truth.empty()) throw Error(ErrorCode::kInvalidArgument, "no samples to score");

  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++m.confusion[to_int(truth[i])][to_int(predicted[i])];

  const auto f1 = [&](int c) {
    const double tp = static_cast<double>(m.confusion[c][c]);
    const double fp = static_cast<double>(m.confusion[1 - c][c]);
    const double fn = static_cast<double>(m.confusion[c][1 - c]);
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  };
  m.accuracy = static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) /
               static_cast<double>(truth.size());
  m.f1_favor = f1(1);
  m.f1_against = f1(0);
  m.macro_f1 = (m.f1_favor + m.f1_against) / 2.0;
  return m;
}

void save_head(const HeadParams& params, const TrainConfig& cfg,
               const std::filesystem::path& path) {
  const nlohmann::json config = {{"learning_rate", cfg.learning_rate},
                                 {"epochs", cfg.epochs},
                                 {"l2", cfg.l2},
                                 {"seed", cfg.seed}};
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(stable_hash(config.dump())));
  const nlohmann::json manifest = {{"dim", params.weights.size()},
                                   {"weights", params.weights},
                                   {"bias", params.bias},
                                   {"config", config},
                                   {"config_digest", digest}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

HeadParams load_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    const auto manifest = nlohmann::json::parse(in);
    HeadParams p;
    p.weights = manifest.at("weights").get<std::vector<double>>();
    p.bias = manifest.at("bias").get<double>();
    if (manifest.at("dim").get<std::size_t>() != p.weights.size())
      throw Error(ErrorCode::kCorruptFile, path.string() + ": dim does not match weights");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, path.string() + ": " + e.what());
  }
}

}  // namespace sqbc
