#include "semprobe/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "semprobe/error.hpp"
#include "semprobe/parallel.hpp"
#include "semprobe/rng.hpp"

namespace semprobe::tsne {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr int kBisectionSteps = 50;
constexpr double kLogBetaMin = -60.0;
constexpr double kLogBetaMax = 60.0;

std::vector<double> squared_distances(const std::vector<double>& x, std::size_t n, std::size_t d) {
  std::vector<double> dist(n * n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[i * d + k] - x[j * d + k];
        s += diff * diff;
      }
      dist[i * n + j] = s;
    }
  });
  return dist;
}

// Conditional row for precision beta; returns entropy in nats.
double conditional_row(const double* dist, std::size_t n, std::size_t i, double beta, double* row) {
  double d_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) d_min = std::min(d_min, dist[j]);
  double z = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0.0;
      continue;
    }
    const double shifted = dist[j] - d_min;
    row[j] = std::exp(-beta * shifted);
    z += row[j];
    weighted += row[j] * shifted;
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= z;
  return std::log(z) + beta * weighted / z;
}

bool has_duplicate_rows(const std::vector<double>& x, std::size_t n, std::size_t d) {
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen.insert(std::vector<double>(x.begin() + i * d, x.begin() + (i + 1) * d)).second) return true;
  }
  return false;
}

// Student-t numerators 1 / (1 + |yi - yj|^2) and their off-diagonal sum.
double student_t(const std::vector<double>& y, std::size_t n, std::vector<double>& num) {
  num.assign(n * n, 0.0);
  std::vector<double> row_sum(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
      num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
      row_sum[i] += num[i * n + j];
    }
  });
  double z = 0.0;
  for (double s : row_sum) z += s;
  return z;
}

}  // namespace

void TsneConfig::validate(std::size_t n) const {
  if (n < 4) throw Error(ErrorKind::Input, "t-SNE needs at least 4 points");
  if (!(perplexity > 1.0)) throw Error(ErrorKind::Input, "perplexity must be > 1");
  if (!(3.0 * perplexity < double(n))) {
    throw Error(ErrorKind::Input, "perplexity " + std::to_string(perplexity) + " must be below N/3 = " +
                                      std::to_string(double(n) / 3.0));
  }
  if (iterations < 250) throw Error(ErrorKind::Input, "t-SNE needs at least 250 iterations");
  if (!(learning_rate > 0)) throw Error(ErrorKind::Input, "learning rate must be > 0");
}

double Affinities::sigma(std::size_t i) const { return std::sqrt(1.0 / (2.0 * beta[i])); }

Affinities calibrate_affinities(const FeatureMatrix& features, double perplexity, std::uint64_t seed) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n < 4) throw Error(ErrorKind::Input, "affinity calibration needs at least 4 points");
  if (!(perplexity > 1.0) || perplexity >= double(n)) {
    throw Error(ErrorKind::Input, "perplexity " + std::to_string(perplexity) + " outside (1, N = " +
                                      std::to_string(n) + ")");
  }
  const auto raw = features.features.f32();
  std::vector<double> x(raw.begin(), raw.end());

  Affinities aff;
  aff.n = n;
  if (has_duplicate_rows(x, n, d)) {
    double scale = 0.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) scale = 1.0;
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (double& v : x) v += 1e-6 * scale * rng.normal();
    aff.jittered = true;
    std::clog << "[semprobe] note: duplicate points jittered before affinity calibration\n";
  }

  const std::vector<double> dist = squared_distances(x, n, d);
  const double target = std::log(perplexity);
  aff.conditional.assign(n * n, 0.0);
  aff.beta.assign(n, 0.0);
  aff.entropy_bits.assign(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const double* di = dist.data() + i * n;
    double* row = aff.conditional.data() + i * n;
    double lo = kLogBetaMin, hi = kLogBetaMax;
    double log_beta = 0.0;
    double h = conditional_row(di, n, i, std::exp(log_beta), row);
    // Entropy decreases as beta grows.
    for (int step = 0; step < kBisectionSteps && std::abs(h - target) > 1e-12; ++step) {
      if (h > target) {
        lo = log_beta;
      } else {
        hi = log_beta;
      }
      log_beta = 0.5 * (lo + hi);
      h = conditional_row(di, n, i, std::exp(log_beta), row);
    }
    aff.beta[i] = std::exp(log_beta);
    aff.entropy_bits[i] = h / std::log(2.0);
  });

  aff.joint.assign(n * n, 0.0);
  const double denom = 2.0 * double(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double p = (aff.conditional[i * n + j] + aff.conditional[j * n + i]) / denom;
      aff.joint[i * n + j] = std::max(p, kProbFloor);
    }
  }
  return aff;
}

double kl_divergence(const Affinities& p, std::span<const double> layout) {
  const std::size_t n = p.n;
  std::vector<double> y(layout.begin(), layout.end());
  std::vector<double> num;
  const double z = student_t(y, n, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p.joint[i * n + j];
      const double qij = std::max(num[i * n + j] / z, kProbFloor);
      kl += pij * std::log(pij / qij);
    }
  }
  return kl;
}

Embedding2D run(const FeatureMatrix& features, const TsneConfig& config) {
  const std::size_t n = features.rows();
  config.validate(n);
  const Affinities p = calibrate_affinities(features, config.perplexity, config.seed);

  Rng rng(config.seed);
  std::vector<double> y(2 * n), update(2 * n, 0.0), gains(2 * n, 1.0), grad(2 * n, 0.0);
  for (auto& v : y) v = 1e-4 * rng.normal();

  Embedding2D out;
  out.n = n;
  std::vector<double> num;
  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    if (iter == config.exaggeration_iters) out.kl_after_exaggeration = kl_divergence(p, y);
    const double exag = iter < config.exaggeration_iters ? config.exaggeration : 1.0;
    const double momentum = iter < config.momentum_switch ? config.initial_momentum : config.final_momentum;

    const double z = student_t(y, n, num);
    parallel_for(n, [&](std::size_t i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = num[i * n + j];
        const double mult = (exag * p.joint[i * n + j] - w / z) * w;
        gx += mult * (y[2 * i] - y[2 * j]);
        gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
      }
      grad[2 * i] = 4.0 * gx;
      grad[2 * i + 1] = 4.0 * gy;
    });

    for (std::size_t k = 0; k < 2 * n; ++k) {
      const bool same_sign = (grad[k] > 0) == (update[k] > 0);
      gains[k] = same_sign ? gains[k] * 0.8 : gains[k] + 0.2;
      gains[k] = std::max(gains[k], 0.01);
      update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
      y[k] += update[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= double(n);
    my /= double(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }
  }
  out.final_kl = kl_divergence(p, y);
  if (config.iterations == config.exaggeration_iters) out.kl_after_exaggeration = out.final_kl;
  out.points.assign(y.begin(), y.end());
  return out;
}

double silhouette(std::span<const float> points, std::size_t dim, std::span<const std::int64_t> labels) {
  if (dim == 0 || points.size() != labels.size() * dim) {
    throw Error(ErrorKind::Shape, "silhouette needs one label per point");
  }
  const std::size_t n = labels.size();
  std::map<std::int64_t, std::size_t> class_size;
  for (auto l : labels) ++class_size[l];
  if (class_size.size() < 2) throw Error(ErrorKind::Input, "silhouette needs at least 2 classes");

  std::vector<double> score(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    if (class_size.at(labels[i]) == 1) return;
    std::map<std::int64_t, double> sum;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = double(points[i * dim + k]) - double(points[j * dim + k]);
        s += diff * diff;
      }
      sum[labels[j]] += std::sqrt(s);
    }
    const double a = sum[labels[i]] / double(class_size.at(labels[i]) - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, count] : class_size) {
      if (label == labels[i]) continue;
      b = std::min(b, sum[label] / double(count));
    }
    const double m = std::max(a, b);
    score[i] = m > 0 ? (b - a) / m : 0.0;
  });
  double total = 0.0;
  for (double s : score) total += s;
  return total / double(n);
}

FeatureMatrix l2_normalize_rows(const FeatureMatrix& features) {
  const std::size_t n = features.rows(), d = features.cols();
  std::vector<float> data(features.features.f32().begin(), features.features.f32().end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += double(data[i * d + k]) * data[i * d + k];
    const double norm = std::sqrt(s);
    if (norm == 0.0) continue;
    for (std::size_t k = 0; k < d; ++k) data[i * d + k] = float(data[i * d + k] / norm);
  }
  return FeatureMatrix::from_rows(n, d, std::move(data), features.ids);
}

FeatureMatrix pca_project(const FeatureMatrix& features, std::size_t dims) {
  const std::size_t n = features.rows(), d = features.cols();
  if (dims == 0 || dims > d) {
    throw Error(ErrorKind::Input, "PCA dims must be in [1, " + std::to_string(d) + "]");
  }
  Eigen::MatrixXd x(n, d);
  const auto raw = features.features.f32();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) x(i, k) = raw[i * d + k];
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / double(std::max<std::size_t>(n - 1, 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues ascend; take the trailing columns, largest first.
  Eigen::MatrixXd basis = solver.eigenvectors().rightCols(dims).rowwise().reverse();
  // Eigenvector signs are arbitrary; make the largest-magnitude loading positive.
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index top = 0;
    basis.col(c).cwiseAbs().maxCoeff(&top);
    if (basis(top, c) < 0) basis.col(c) *= -1.0;
  }
  const Eigen::MatrixXd proj = x * basis;
  std::vector<float> data(n * dims);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dims; ++k) data[i * dims + k] = float(proj(i, k));
  return FeatureMatrix::from_rows(n, dims, std::move(data), features.ids);
}

std::string render_svg(const Embedding2D& embedding, std::span<const std::int64_t> labels) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double size = 600.0, margin = 20.0;
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  for (std::size_t i = 0; i < embedding.n; ++i) {
    const double x = embedding.points[2 * i], y = embedding.points[2 * i + 1];
    if (i == 0) {
      x_min = x_max = x;
      y_min = y_max = y;
    }
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  }
  const double span = std::max({x_max - x_min, y_max - y_min, 1e-12});
  const double scale = (size - 2 * margin) / span;

  std::map<std::int64_t, std::size_t> color;
  for (auto l : labels) color.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [label, idx] : color) idx = next++ % std::size(palette);

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < embedding.n; ++i) {
    const double cx = margin + (embedding.points[2 * i] - x_min) * scale;
    const double cy = size - margin - (embedding.points[2 * i + 1] - y_min) * scale;
    const char* fill = labels.size() == embedding.n ? palette[color[labels[i]]] : palette[0];
    os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"3\" fill=\"" << fill << "\" fill-opacity=\"0.8\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace semprobe::tsne
