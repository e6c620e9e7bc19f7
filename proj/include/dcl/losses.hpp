// Copyright 2026 The DCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Cross-domain losses over paired feature batches: the domain contrast loss
// with its analytic gradient, and the triplet and MMD baselines.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dcl/error.hpp"
#include "dcl/linalg.hpp"

namespace dcl {

enum class FeatureLevel { image, region };

struct LossConfig {
  double tau = 0.5;
  FeatureLevel variant = FeatureLevel::image;
};

inline void validate(const LossConfig& cfg) {
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) {
    throw DomainError("LossConfig: tau must be positive and finite");
  }
}

// Paired cross-domain features. side_a[i] is the translated counterpart of
// side_b[i]; every j != i is a negative for row i.
struct FeatureBatch {
  std::vector<Vec> side_a;
  std::vector<Vec> side_b;
  std::vector<int> labels;

  std::size_t size() const { return side_a.size(); }
};

inline void validate(const FeatureBatch& batch) {
  if (batch.side_a.size() != batch.side_b.size()) {
    throw ShapeError("FeatureBatch: sides differ in length");
  }
  if (!batch.labels.empty() && batch.labels.size() != batch.side_a.size()) {
    throw ShapeError("FeatureBatch: label count differs from pair count");
  }
  const std::size_t da = common_dim(batch.side_a, "FeatureBatch");
  const std::size_t db = common_dim(batch.side_b, "FeatureBatch");
  if (!batch.side_a.empty() && da != db) {
    throw ShapeError("FeatureBatch: sides differ in dimensionality");
  }
}

// value = mean(direction-1 terms) + mean(direction-2 terms). For the DC loss
// per_sample_terms holds the N a->b terms followed by the N b->a terms.
struct LossValue {
  double value = 0.0;
  Vec per_sample_terms;
};

struct BatchGradient {
  std::vector<Vec> grad_a;
  std::vector<Vec> grad_b;
};

struct LossAndGradient {
  LossValue loss;
  BatchGradient grad;
};

namespace detail {

inline std::vector<Vec> zeros_like(const std::vector<Vec>& xs) {
  std::vector<Vec> out;
  out.reserve(xs.size());
  for (const Vec& x : xs) out.emplace_back(x.size(), 0.0);
  return out;
}

}  // namespace detail

// Domain contrast loss with temperature, plus its gradient with respect to
// every feature vector on both sides.
//
// With S(i, j) = sim(a_i, b_j), the a->b direction is a softmax cross-entropy
// over row i of S / tau and the b->a direction one over column i, the
// positive entry included in each denominator. dL/dS(i, j) is
//   (P(i, j) + Q(j, i) - 2 [i == j]) / (N tau)
// where P is the row softmax and Q the column softmax (indexed by column).
// It is pushed through the cosine Jacobian
//   d sim(u, v) / du = v / (|u||v|) - sim(u, v) u / |u|^2.
inline LossAndGradient dc_loss_and_grad(const FeatureBatch& batch,
                                        const LossConfig& cfg,
                                        bool want_grad = true) {
  validate(cfg);
  validate(batch);
  const std::size_t n = batch.size();
  if (n == 0) throw DomainError("dc_loss: empty batch");

  const SimMatrix sim = pairwise_cosine(batch.side_a, batch.side_b);
  const double inv_tau = 1.0 / cfg.tau;

  LossAndGradient out;
  out.loss.per_sample_terms.assign(2 * n, 0.0);

  Matrix row_soft(n, n);  // P(i, j): softmax over j of S(i, j)
  Matrix col_soft(n, n);  // Q(i, j): softmax over j of S(j, i)
  Vec logits(n);
  double sum_ab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) logits[j] = sim(i, j) * inv_tau;
    const double lse = log_sum_exp(logits);
    const double term = lse - logits[i];
    out.loss.per_sample_terms[i] = term;
    sum_ab += term;
    for (std::size_t j = 0; j < n; ++j)
      row_soft(i, j) = std::exp(logits[j] - lse);
  }
  double sum_ba = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) logits[j] = sim(j, i) * inv_tau;
    const double lse = log_sum_exp(logits);
    const double term = lse - logits[i];
    out.loss.per_sample_terms[n + i] = term;
    sum_ba += term;
    for (std::size_t j = 0; j < n; ++j)
      col_soft(i, j) = std::exp(logits[j] - lse);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss.value = sum_ab * inv_n + sum_ba * inv_n;

  if (!want_grad) return out;

  out.grad.grad_a = detail::zeros_like(batch.side_a);
  out.grad.grad_b = detail::zeros_like(batch.side_b);
  if (n == 1) return out;

  Vec norm_a(n), norm_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    norm_a[i] = norm(batch.side_a[i]);
    norm_b[i] = norm(batch.side_b[i]);
  }
  const double scale = inv_n * inv_tau;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g = scale * (row_soft(i, j) + col_soft(j, i) -
                                (i == j ? 2.0 : 0.0));
      if (g == 0.0) continue;
      const double s = sim(i, j);
      const double cross = g / (norm_a[i] * norm_b[j]);
      // d/da_i
      axpy(cross, batch.side_b[j], out.grad.grad_a[i]);
      axpy(-g * s / (norm_a[i] * norm_a[i]), batch.side_a[i],
           out.grad.grad_a[i]);
      // d/db_j
      axpy(cross, batch.side_a[i], out.grad.grad_b[j]);
      axpy(-g * s / (norm_b[j] * norm_b[j]), batch.side_b[j],
           out.grad.grad_b[j]);
    }
  }
  return out;
}

inline LossValue dc_loss(const FeatureBatch& batch, const LossConfig& cfg) {
  return dc_loss_and_grad(batch, cfg, false).loss;
}

inline BatchGradient dc_loss_grad(const FeatureBatch& batch,
                                  const LossConfig& cfg) {
  return dc_loss_and_grad(batch, cfg, true).grad;
}

inline constexpr double kTripletMargin = 0.5;

// Triplet baseline: for anchor b_i, positive a_i and negatives a_j (j != i),
//   sum_j max(|b_i - a_i|^2 - |b_i - a_j|^2 + margin, 0)
// averaged over i. per_sample_terms holds the N row sums.
inline LossAndGradient triplet_loss_and_grad(const FeatureBatch& batch,
                                             bool want_grad = true) {
  validate(batch);
  const std::size_t n = batch.size();
  LossAndGradient out;
  out.loss.per_sample_terms.assign(n, 0.0);
  if (want_grad) {
    out.grad.grad_a = detail::zeros_like(batch.side_a);
    out.grad.grad_b = detail::zeros_like(batch.side_b);
  }
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& anchor = batch.side_b[i];
    const Vec& positive = batch.side_a[i];
    const double pos = squared_distance(anchor, positive);
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec& negative = batch.side_a[j];
      const double hinge =
          pos - squared_distance(anchor, negative) + kTripletMargin;
      if (hinge <= 0.0) continue;
      row += hinge;
      if (!want_grad) continue;
      // d/d anchor = 2 (negative - positive); d/d positive = 2 (positive -
      // anchor); d/d negative = 2 (anchor - negative).
      for (std::size_t k = 0; k < anchor.size(); ++k) {
        out.grad.grad_b[i][k] += 2.0 * inv_n * (negative[k] - positive[k]);
        out.grad.grad_a[i][k] += 2.0 * inv_n * (positive[k] - anchor[k]);
        out.grad.grad_a[j][k] += 2.0 * inv_n * (anchor[k] - negative[k]);
      }
    }
    out.loss.per_sample_terms[i] = row;
    total += row;
  }
  out.loss.value = total * inv_n;
  return out;
}

inline LossValue triplet_loss(const FeatureBatch& batch) {
  return triplet_loss_and_grad(batch, false).loss;
}

inline double rbf_kernel(VecView u, VecView v, double bandwidth) {
  return std::exp(-squared_distance(u, v) / (2.0 * bandwidth * bandwidth));
}

struct MmdAndGradient {
  double value = 0.0;
  std::vector<Vec> grad_a;
  std::vector<Vec> grad_b;
};

// Biased MMD^2 with a Gaussian kernel:
//   mean k(a, a') + mean k(b, b') - 2 mean k(a, b)
// The bandwidth is treated as a constant for the gradient.
inline MmdAndGradient mmd_rbf_and_grad(const std::vector<Vec>& a,
                                       const std::vector<Vec>& b,
                                       double bandwidth,
                                       bool want_grad = true) {
  if (a.empty() || b.empty()) throw DomainError("mmd_rbf: empty sample set");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw DomainError("mmd_rbf: bandwidth must be positive");
  }
  const std::size_t da = common_dim(a, "mmd_rbf");
  const std::size_t db = common_dim(b, "mmd_rbf");
  if (da != db) throw ShapeError("mmd_rbf: dimension mismatch");

  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double inv_bw2 = 1.0 / (bandwidth * bandwidth);
  MmdAndGradient out;
  if (want_grad) {
    out.grad_a = detail::zeros_like(a);
    out.grad_b = detail::zeros_like(b);
  }

  // d k(u, v) / du = -k(u, v) (u - v) / bandwidth^2
  auto accumulate = [&](const std::vector<Vec>& xs, const std::vector<Vec>& ys,
                        double weight, std::vector<Vec>* gx,
                        std::vector<Vec>* gy) {
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = 0; j < ys.size(); ++j) {
        const double k = rbf_kernel(xs[i], ys[j], bandwidth);
        acc += k;
        if (gx == nullptr) continue;
        const double c = -weight * k * inv_bw2;
        for (std::size_t d = 0; d < da; ++d) {
          const double diff = xs[i][d] - ys[j][d];
          (*gx)[i][d] += c * diff;
          (*gy)[j][d] -= c * diff;
        }
      }
    }
    return acc * weight;
  };

  std::vector<Vec>* ga = want_grad ? &out.grad_a : nullptr;
  std::vector<Vec>* gb = want_grad ? &out.grad_b : nullptr;
  const double kaa = accumulate(a, a, 1.0 / (na * na), ga, ga);
  const double kbb = accumulate(b, b, 1.0 / (nb * nb), gb, gb);
  const double kab = accumulate(a, b, -2.0 / (na * nb), ga, gb);
  out.value = std::max(0.0, kaa + kbb + kab);
  return out;
}

inline double mmd_rbf(const std::vector<Vec>& a, const std::vector<Vec>& b,
                      double bandwidth) {
  return mmd_rbf_and_grad(a, b, bandwidth, false).value;
}

// Median pairwise Euclidean distance over the pooled samples. Pools larger
// than max_points are subsampled with a fixed stride so the result stays
// deterministic.
inline double median_heuristic_bandwidth(const std::vector<Vec>& a,
                                         const std::vector<Vec>& b,
                                         std::size_t max_points = 600) {
  std::vector<const Vec*> pool;
  pool.reserve(a.size() + b.size());
  for (const Vec& v : a) pool.push_back(&v);
  for (const Vec& v : b) pool.push_back(&v);
  if (pool.size() > max_points) {
    std::vector<const Vec*> sub;
    sub.reserve(max_points);
    for (std::size_t k = 0; k < max_points; ++k)
      sub.push_back(pool[k * pool.size() / max_points]);
    pool.swap(sub);
  }
  std::vector<double> dists;
  dists.reserve(pool.size() * (pool.size() - 1) / 2);
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j)
      dists.push_back(std::sqrt(squared_distance(*pool[i], *pool[j])));
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  const double med = *mid;
  return med > 0.0 ? med : 1.0;
}

}  // namespace dcl
