#include "semprobe/linear_probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "semprobe/error.hpp"
#include "semprobe/parallel.hpp"
#include "semprobe/rng.hpp"

namespace semprobe::probe {
namespace {

constexpr double kLogFloor = 1e-12;

// Examples per reduction chunk. Fixed so that the summation order, and hence
// every bit of the result, is independent of the thread count.
constexpr std::size_t kChunk = 32;

void check_model(const ProbeModel& model) {
  if (model.weights.size() != model.num_classes * model.dim || model.bias.size() != model.num_classes) {
    throw Error(ErrorKind::Shape, "probe model buffers do not match C x D");
  }
}

std::size_t batch_rows(const ProbeModel& model, std::span<const float> batch) {
  if (model.dim == 0 || batch.size() % model.dim != 0) {
    throw Error(ErrorKind::Shape, "batch of " + std::to_string(batch.size()) +
                                      " values is not a multiple of model dim " + std::to_string(model.dim));
  }
  return batch.size() / model.dim;
}

void check_labels(const ProbeModel& model, std::span<const std::int64_t> labels, std::size_t rows) {
  if (labels.size() != rows) {
    throw Error(ErrorKind::Shape, "batch has " + std::to_string(rows) + " rows but " +
                                      std::to_string(labels.size()) + " labels");
  }
  for (auto y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes) {
      throw Error(ErrorKind::Range, "label " + std::to_string(y) + " outside [0, " +
                                        std::to_string(model.num_classes) + ")");
    }
  }
}

// Logits of one row in double precision.
void row_logits(const ProbeModel& model, std::span<const float> x, std::vector<double>& out) {
  out.resize(model.num_classes);
  for (std::size_t c = 0; c < model.num_classes; ++c) {
    const auto w = model.weight_row(c);
    double acc = model.bias[c];
    for (std::size_t d = 0; d < model.dim; ++d) acc += double(w[d]) * double(x[d]);
    out[c] = acc;
  }
}

// In-place softmax; returns log-sum-exp.
double softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return m + std::log(sum);
}

struct Partial {
  std::vector<double> dw;
  std::vector<double> db;
  double loss = 0.0;
};

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::Input, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::Input, "batch size must be >= 1");
  if (!(learning_rate > 0)) throw Error(ErrorKind::Input, "learning rate must be > 0");
}

std::vector<float> forward(const ProbeModel& model, std::span<const float> batch, std::size_t feature_dim) {
  check_model(model);
  if (feature_dim != model.dim) {
    throw Error(ErrorKind::Shape, "feature dim " + std::to_string(feature_dim) + " != model dim " +
                                      std::to_string(model.dim));
  }
  const std::size_t rows = batch_rows(model, batch);
  std::vector<float> logits(rows * model.num_classes);
  parallel_for(rows, [&](std::size_t i) {
    std::vector<double> z;
    row_logits(model, batch.subspan(i * model.dim, model.dim), z);
    for (std::size_t c = 0; c < model.num_classes; ++c) logits[i * model.num_classes + c] = float(z[c]);
  });
  return logits;
}

std::vector<float> softmax(std::span<const float> logits) {
  if (logits.empty()) return {};
  std::vector<double> z(logits.begin(), logits.end());
  for (double v : z) {
    if (std::isnan(v)) throw Error(ErrorKind::Numeric, "NaN logit in softmax input");
  }
  softmax_inplace(z);
  return std::vector<float>(z.begin(), z.end());
}

float cross_entropy(std::span<const float> probs, std::span<const std::int64_t> labels, std::size_t num_classes) {
  if (num_classes == 0 || probs.size() != labels.size() * num_classes) {
    throw Error(ErrorKind::Shape, "probabilities must be [B, C] with one label per row");
  }
  if (labels.empty()) throw Error(ErrorKind::Input, "cross-entropy of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw Error(ErrorKind::Range, "label " + std::to_string(labels[i]) + " outside [0, " +
                                        std::to_string(num_classes) + ")");
    }
    const double p = probs[i * num_classes + static_cast<std::size_t>(labels[i])];
    total += -std::log(std::max(p, kLogFloor));
  }
  return static_cast<float>(total / double(labels.size()));
}

double batch_loss(const ProbeModel& model, std::span<const float> batch, std::span<const std::int64_t> labels) {
  return gradient(model, batch, labels).loss;
}

Gradients gradient(const ProbeModel& model, std::span<const float> batch, std::span<const std::int64_t> labels) {
  check_model(model);
  const std::size_t rows = batch_rows(model, batch);
  check_labels(model, labels, rows);
  if (rows == 0) throw Error(ErrorKind::Input, "gradient of an empty batch");

  const std::size_t C = model.num_classes, D = model.dim;
  const std::size_t chunks = (rows + kChunk - 1) / kChunk;
  std::vector<Partial> partials(chunks);
  parallel_for(chunks, [&](std::size_t k) {
    Partial& part = partials[k];
    part.dw.assign(C * D, 0.0);
    part.db.assign(C, 0.0);
    std::vector<double> z;
    const std::size_t end = std::min(rows, (k + 1) * kChunk);
    for (std::size_t i = k * kChunk; i < end; ++i) {
      const auto x = batch.subspan(i * D, D);
      const auto y = static_cast<std::size_t>(labels[i]);
      row_logits(model, x, z);
      const double zy = z[y];
      const double lse = softmax_inplace(z);
      part.loss += lse - zy;
      z[y] -= 1.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double g = z[c];
        part.db[c] += g;
        double* row = part.dw.data() + c * D;
        for (std::size_t d = 0; d < D; ++d) row[d] += g * double(x[d]);
      }
    }
  });

  std::vector<double> dw(C * D, 0.0), db(C, 0.0);
  double loss = 0.0;
  for (const auto& part : partials) {
    for (std::size_t j = 0; j < dw.size(); ++j) dw[j] += part.dw[j];
    for (std::size_t c = 0; c < C; ++c) db[c] += part.db[c];
    loss += part.loss;
  }
  const double inv = 1.0 / double(rows);
  Gradients g;
  g.weights.resize(C * D);
  g.bias.resize(C);
  for (std::size_t j = 0; j < dw.size(); ++j) g.weights[j] = float(dw[j] * inv);
  for (std::size_t c = 0; c < C; ++c) g.bias[c] = float(db[c] * inv);
  g.loss = loss * inv;
  return g;
}

void adamw_update(std::span<float> params, std::span<const float> grads, Moments& moments, std::uint64_t t,
                  const TrainConfig& config) {
  if (grads.size() != params.size() || moments.first.size() != params.size() ||
      moments.second.size() != params.size()) {
    throw Error(ErrorKind::Shape, "AdamW buffers differ in size");
  }
  if (t == 0) throw Error(ErrorKind::Input, "AdamW step counter must be incremented before the update");
  const double bc1 = 1.0 - std::pow(config.beta1, double(t));
  const double bc2 = 1.0 - std::pow(config.beta2, double(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = moments.first[i];
    double& v = moments.second[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    const double theta = params[i];
    params[i] = float(theta - config.learning_rate * (m_hat / (std::sqrt(v_hat) + config.eps) +
                                                       config.weight_decay * theta));
  }
}

void adamw_step(ProbeModel& model, OptimizerState& state, const Gradients& grads, const TrainConfig& config) {
  ++state.step;
  adamw_update(model.weights, grads.weights, state.weights, state.step, config);
  adamw_update(model.bias, grads.bias, state.bias, state.step, config);
}

TrainResult train(const FeatureMatrix& features, const LabelVector& labels,
                  const std::optional<LabeledFeatures>& val, const TrainConfig& config) {
  config.validate();
  features.validate();
  labels.validate();
  const std::size_t N = features.rows(), D = features.cols();
  if (N == 0) throw Error(ErrorKind::Input, "empty training set");
  if (labels.labels.size() != N) {
    throw Error(ErrorKind::Input, "features have " + std::to_string(N) + " rows but labels have " +
                                      std::to_string(labels.labels.size()));
  }
  if (labels.num_classes < 2) throw Error(ErrorKind::Input, "need at least 2 classes");
  if (val) {
    if (val->features.cols() != D) {
      throw Error(ErrorKind::Shape, "validation dim " + std::to_string(val->features.cols()) +
                                        " != training dim " + std::to_string(D));
    }
    if (val->labels.num_classes > labels.num_classes) {
      throw Error(ErrorKind::Input, "validation labels use more classes than training labels");
    }
  }

  const auto C = static_cast<std::size_t>(labels.num_classes);
  TrainResult result{ProbeModel::zeros(C, D), {}};
  OptimizerState state = OptimizerState::for_model(result.model);
  Rng rng(config.seed);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto all = features.features.f32();

  std::vector<float> batch;
  std::vector<std::int64_t> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = N - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < N; start += config.batch_size) {
      const std::size_t end = std::min(N, start + config.batch_size);
      batch.resize((end - start) * D);
      batch_labels.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        std::copy_n(all.begin() + order[i] * D, D, batch.begin() + (i - start) * D);
        batch_labels[i - start] = labels.labels[order[i]];
      }
      const Gradients g = gradient(result.model, batch, batch_labels);
      epoch_loss += g.loss * double(end - start);
      adamw_step(result.model, state, g, config);
    }
    EpochMetrics metrics{epoch + 1, epoch_loss / double(N), std::nullopt};
    if (val) metrics.val_top1 = topk_accuracy(result.model, val->features, val->labels, 1);
    result.history.push_back(metrics);
  }
  return result;
}

double topk_accuracy(const ProbeModel& model, const FeatureMatrix& features, const LabelVector& labels,
                     std::size_t k) {
  check_model(model);
  if (k < 1 || k > model.num_classes) {
    throw Error(ErrorKind::Input, "k = " + std::to_string(k) + " outside [1, " +
                                      std::to_string(model.num_classes) + "]");
  }
  const std::size_t N = features.rows();
  if (labels.labels.size() != N) throw Error(ErrorKind::Input, "feature/label row count mismatch");
  if (N == 0) throw Error(ErrorKind::Input, "accuracy of an empty set");
  check_labels(model, labels.labels, N);
  const auto logits = forward(model, features.features.f32(), features.cols());
  const std::size_t C = model.num_classes;
  std::vector<std::uint8_t> hit(N, 0);
  parallel_for(N, [&](std::size_t i) {
    const float* z = logits.data() + i * C;
    const auto y = static_cast<std::size_t>(labels.labels[i]);
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < C; ++c) {
      if (z[c] > z[y] || (z[c] == z[y] && c < y)) ++ahead;
    }
    hit[i] = ahead < k ? 1 : 0;
  });
  const std::size_t hits = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
  return double(hits) / double(N);
}

}  // namespace semprobe::probe
