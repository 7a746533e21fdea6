#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semprobe/tensor.hpp"

namespace semprobe::tsne {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  double exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  std::uint64_t seed = 0;

  // 1 < perplexity < N/3 and iterations >= 250.
  void validate(std::size_t n) const;
};

struct Affinities {
  std::size_t n = 0;
  std::vector<double> conditional;   // row i: p(j | i), rows sum to 1
  std::vector<double> joint;         // (P + P^T) / 2N, floored at 1e-12 off the diagonal
  std::vector<double> beta;          // Gaussian precision 1 / (2 sigma^2) per row
  std::vector<double> entropy_bits;  // Shannon entropy of each conditional row
  bool jittered = false;             // duplicate rows were perturbed before calibration

  double sigma(std::size_t i) const;
};

// Per-row bisection (at most 50 steps, on log beta) so that each row's
// perplexity 2^H matches the target. Exact duplicate points are separated by
// seeded jitter of relative size 1e-6.
Affinities calibrate_affinities(const FeatureMatrix& features, double perplexity, std::uint64_t seed = 0);

struct Embedding2D {
  std::size_t n = 0;
  std::vector<float> points;  // [N, 2]
  double final_kl = 0.0;
  double kl_after_exaggeration = 0.0;  // KL(P || Q) when exaggeration ends
};

// KL(P || Q) for a 2-D layout under the Student-t kernel.
double kl_divergence(const Affinities& p, std::span<const double> layout);

// Exact O(N^2) t-SNE, deterministic for a seed.
Embedding2D run(const FeatureMatrix& features, const TsneConfig& config);

// Mean silhouette with Euclidean distance; singleton classes score 0.
double silhouette(std::span<const float> points, std::size_t dim, std::span<const std::int64_t> labels);

FeatureMatrix l2_normalize_rows(const FeatureMatrix& features);
FeatureMatrix pca_project(const FeatureMatrix& features, std::size_t dims);

std::string render_svg(const Embedding2D& embedding, std::span<const std::int64_t> labels);

}  // namespace semprobe::tsne
