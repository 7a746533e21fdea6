#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semprobe/probe_model.hpp"
#include "semprobe/tensor.hpp"

namespace semprobe::probe {

// Defaults follow the probing protocol: 10 epochs, batch 128, lr 1e-3, AdamW.
struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

// First/second moment accumulators for one flat parameter buffer.
struct Moments {
  std::vector<double> first;
  std::vector<double> second;

  explicit Moments(std::size_t n = 0) : first(n, 0.0), second(n, 0.0) {}
};

struct OptimizerState {
  Moments weights;
  Moments bias;
  std::uint64_t step = 0;

  static OptimizerState for_model(const ProbeModel& model) {
    return OptimizerState{Moments(model.weights.size()), Moments(model.bias.size()), 0};
  }
};

struct Gradients {
  std::vector<float> weights;  // [C, D]
  std::vector<float> bias;     // [C]
  double loss = 0.0;           // mean cross-entropy of the batch
};

// logits[i] = W x_i + b for a row-major batch of width feature_dim.
std::vector<float> forward(const ProbeModel& model, std::span<const float> batch, std::size_t feature_dim);

// Max-subtracted softmax over one logit vector. Throws Numeric on NaN.
std::vector<float> softmax(std::span<const float> logits);

// Mean of -log(max(p[label], 1e-12)) over a row-major [B, C] probability batch.
float cross_entropy(std::span<const float> probs, std::span<const std::int64_t> labels, std::size_t num_classes);

// Mean cross-entropy of the model on a batch, evaluated through log-softmax
// in double precision (exactly ln C for an all-zero model).
double batch_loss(const ProbeModel& model, std::span<const float> batch, std::span<const std::int64_t> labels);

// Analytic gradient of batch_loss: dW = mean (p - y) x^T, db = mean (p - y).
Gradients gradient(const ProbeModel& model, std::span<const float> batch, std::span<const std::int64_t> labels);

// One AdamW update of a flat parameter buffer at (already incremented) step t.
void adamw_update(std::span<float> params, std::span<const float> grads, Moments& moments, std::uint64_t t,
                  const TrainConfig& config);

// Increments state.step, then updates weights and bias.
void adamw_step(ProbeModel& model, OptimizerState& state, const Gradients& grads, const TrainConfig& config);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-example loss over the epoch's batches
  std::optional<double> val_top1;
};

struct TrainResult {
  ProbeModel model;
  std::vector<EpochMetrics> history;
};

struct LabeledFeatures {
  const FeatureMatrix& features;
  const LabelVector& labels;
};

// Zero-initialised mini-batch AdamW training; bit-deterministic for a seed.
TrainResult train(const FeatureMatrix& features, const LabelVector& labels,
                  const std::optional<LabeledFeatures>& val, const TrainConfig& config);

// Fraction of rows whose true label is among the k largest logits; equal
// logits rank the lower class index first.
double topk_accuracy(const ProbeModel& model, const FeatureMatrix& features, const LabelVector& labels,
                     std::size_t k);

}  // namespace semprobe::probe
