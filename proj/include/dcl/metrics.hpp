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

// Transferability and discriminability measurements of an adapted model.
// Accuracy and recall stand in for detection mAP, which has no analogue at
// feature scale.

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dcl/adapter.hpp"
#include "dcl/datasets.hpp"
#include "dcl/linalg.hpp"
#include "dcl/losses.hpp"

namespace dcl {

struct EvalReport {
  double target_accuracy = 0.0;
  double source_accuracy = 0.0;
  // Empty entries mark classes absent from the evaluation set.
  std::vector<std::optional<double>> per_class_recall;
  double minority_recall = 0.0;
  int minority_class = -1;
  double mmd_source_target = 0.0;
  double mmd_bandwidth = 0.0;
  double mean_positive_pair_cosine = 0.0;
  double mean_offdiag_cosine = 0.0;
  std::vector<std::optional<double>> class_center_cross_domain_cosine;
  // Same quantities for the nearest-neighbour classifier on adapter outputs,
  // with labeled source samples as the reference set.
  double target_nn_accuracy = 0.0;
  std::vector<std::optional<double>> nn_per_class_recall;
  double nn_minority_recall = 0.0;
};

struct EvalOptions {
  // Pools are strided down to this many points for the quadratic statistics.
  std::size_t max_points = 1000;
  std::size_t nn_reference_points = 1000;
  double nn_tau = 0.1;
};

namespace detail {

inline std::vector<std::size_t> strided_indices(std::size_t n, std::size_t max) {
  std::vector<std::size_t> idx;
  const std::size_t m = std::min(n, max);
  idx.reserve(m);
  for (std::size_t k = 0; k < m; ++k) idx.push_back(k * n / m);
  return idx;
}

inline std::vector<Vec> gather(const std::vector<Vec>& xs,
                               const std::vector<std::size_t>& idx) {
  std::vector<Vec> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(xs[i]);
  return out;
}

struct Accuracy {
  double accuracy = 0.0;
  std::vector<std::optional<double>> recall;
  std::vector<std::size_t> support;
};

template <class Predict>
Accuracy accuracy_of(std::size_t k, const DomainSet& set, Predict&& predict) {
  std::vector<std::size_t> hits(k, 0), support(k, 0);
  std::size_t correct = 0, counted = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const int y = set.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) continue;
    ++counted;
    ++support[static_cast<std::size_t>(y)];
    if (static_cast<int>(predict(i)) == y) {
      ++correct;
      ++hits[static_cast<std::size_t>(y)];
    }
  }
  Accuracy a;
  a.accuracy = counted == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(counted);
  a.support = support;
  a.recall.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (support[c] > 0) {
      a.recall[c] = static_cast<double>(hits[c]) / static_cast<double>(support[c]);
    }
  }
  return a;
}

inline Accuracy accuracy_of(const AdapterModel& model, const DomainSet& set) {
  return accuracy_of(model.num_classes(), set,
                     [&](std::size_t i) { return model.predict(set.features[i]); });
}

// Cosine similarity that scores a zero vector (a dead ReLU output) as 0
// instead of rejecting it.
inline double cosine_or_zero(VecView u, VecView v) {
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot(u, v) / (nu * nv);
}

inline std::optional<Vec> class_center(const std::vector<Vec>& feats,
                                       const std::vector<int>& labels, int c) {
  std::optional<Vec> center;
  std::size_t count = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (labels[i] != c) continue;
    if (!center) center = Vec(feats[i].size(), 0.0);
    axpy(1.0, feats[i], *center);
    ++count;
  }
  if (center) {
    for (double& v : *center) v /= static_cast<double>(count);
  }
  return center;
}

}  // namespace detail

// Multi-class nearest-neighbour vote: class scores are the softmax weights of
// cos(query, reference_j) / tau summed per reference label. Zero vectors
// have cosine 0 to everything.
inline std::size_t nn_predict(VecView query, const std::vector<Vec>& reference,
                              const std::vector<int>& labels, std::size_t num_classes,
                              double tau) {
  if (reference.empty() || reference.size() != labels.size()) {
    throw ShapeError("nn_predict: reference set needs one label per vector");
  }
  if (!(tau > 0.0)) throw DomainError("nn_predict: tau must be > 0");
  Vec logits(reference.size());
  for (std::size_t j = 0; j < reference.size(); ++j)
    logits[j] = detail::cosine_or_zero(query, reference[j]) / tau;
  const Vec w = softmax(logits);
  Vec score(num_classes, 0.0);
  for (std::size_t j = 0; j < reference.size(); ++j)
    score[static_cast<std::size_t>(labels[j])] += w[j];
  return argmax(score);
}

// Evaluates the head on the labeled target originals and the alignment of
// adapter outputs between domains. Positive pairs are the source samples and
// their target-style translations.
inline EvalReport evaluate(const AdapterModel& model, const PairedDomains& data,
                           const EvalOptions& opts = {}) {
  if (data.source.empty() || data.target.empty()) {
    throw DomainError("evaluate: source and target sets must be nonempty");
  }
  EvalReport r;
  const detail::Accuracy tgt = detail::accuracy_of(model, data.target);
  r.target_accuracy = tgt.accuracy;
  r.per_class_recall = tgt.recall;
  r.source_accuracy = detail::accuracy_of(model, data.source).accuracy;
  std::size_t fewest = 0;
  for (std::size_t c = 0; c < tgt.support.size(); ++c) {
    if (tgt.support[c] == 0) continue;
    if (r.minority_class < 0 || tgt.support[c] < fewest) {
      r.minority_class = static_cast<int>(c);
      fewest = tgt.support[c];
    }
  }
  if (r.minority_class >= 0) {
    r.minority_recall = *tgt.recall[static_cast<std::size_t>(r.minority_class)];
  }

  const std::vector<Vec> fs = model.features_of(data.source.features);
  const std::vector<Vec> ft = model.features_of(data.target.features);
  {
    const std::size_t k = model.num_classes();
    std::vector<Vec> ref;
    std::vector<int> ref_labels;
    std::vector<std::size_t> labeled;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const int y = data.source.labels[i];
      if (y >= 0 && static_cast<std::size_t>(y) < k) labeled.push_back(i);
    }
    for (std::size_t idx : detail::strided_indices(labeled.size(), opts.nn_reference_points)) {
      ref.push_back(fs[labeled[idx]]);
      ref_labels.push_back(data.source.labels[labeled[idx]]);
    }
    if (!ref.empty()) {
      const detail::Accuracy nn = detail::accuracy_of(k, data.target, [&](std::size_t i) {
        return nn_predict(ft[i], ref, ref_labels, k, opts.nn_tau);
      });
      r.target_nn_accuracy = nn.accuracy;
      r.nn_per_class_recall = nn.recall;
      if (r.minority_class >= 0) {
        r.nn_minority_recall = *nn.recall[static_cast<std::size_t>(r.minority_class)];
      }
    }
  }
  {
    const auto fs_sub = detail::gather(fs, detail::strided_indices(fs.size(), opts.max_points));
    const auto ft_sub = detail::gather(ft, detail::strided_indices(ft.size(), opts.max_points));
    r.mmd_bandwidth = median_heuristic_bandwidth(fs_sub, ft_sub);
    r.mmd_source_target = mmd_rbf(fs_sub, ft_sub, r.mmd_bandwidth);
  }

  // Pair statistics over translations from the source into the target style,
  // falling back to the reverse direction when a file omits them.
  std::vector<Vec> side_a, side_b;
  if (!data.s_to_t_of.empty()) {
    const auto idx = detail::strided_indices(data.s_to_t_of.size(), opts.max_points);
    for (std::size_t k : idx) {
      side_a.push_back(model.features(data.source_to_target.features[k]));
      side_b.push_back(fs[data.s_to_t_of[k]]);
    }
  } else if (!data.t_to_s_of.empty()) {
    const auto idx = detail::strided_indices(data.t_to_s_of.size(), opts.max_points);
    for (std::size_t k : idx) {
      side_a.push_back(ft[data.t_to_s_of[k]]);
      side_b.push_back(model.features(data.target_to_source.features[k]));
    }
  }
  if (!side_a.empty()) {
    double pos = 0.0, off = 0.0;
    const std::size_t n = side_a.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        (i == j ? pos : off) += detail::cosine_or_zero(side_a[i], side_b[j]);
    r.mean_positive_pair_cosine = pos / static_cast<double>(n);
    r.mean_offdiag_cosine = n > 1 ? off / static_cast<double>(n * (n - 1)) : 0.0;
  }

  const std::size_t k = model.num_classes();
  r.class_center_cross_domain_cosine.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto cs = detail::class_center(fs, data.source.labels, static_cast<int>(c));
    const auto ct = detail::class_center(ft, data.target.labels, static_cast<int>(c));
    if (cs && ct && norm(*cs) > 0.0 && norm(*ct) > 0.0) {
      r.class_center_cross_domain_cosine[c] = cosine_sim(*cs, *ct);
    }
  }
  return r;
}

inline nlohmann::json optional_array(const std::vector<std::optional<double>>& xs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& x : xs) a.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
  return a;
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"target_accuracy", r.target_accuracy},
          {"source_accuracy", r.source_accuracy},
          {"per_class_recall", optional_array(r.per_class_recall)},
          {"minority_class", r.minority_class},
          {"minority_recall", r.minority_recall},
          {"mmd_source_target", r.mmd_source_target},
          {"mmd_bandwidth", r.mmd_bandwidth},
          {"mean_positive_pair_cosine", r.mean_positive_pair_cosine},
          {"mean_offdiag_cosine", r.mean_offdiag_cosine},
          {"class_center_cross_domain_cosine",
           optional_array(r.class_center_cross_domain_cosine)},
          {"target_nn_accuracy", r.target_nn_accuracy},
          {"nn_per_class_recall", optional_array(r.nn_per_class_recall)},
          {"nn_minority_recall", r.nn_minority_recall},
          {"metric_note", "accuracy and recall replace detection mAP at feature scale"}};
}

}  // namespace dcl
