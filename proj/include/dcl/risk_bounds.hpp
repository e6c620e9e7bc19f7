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

// Empirical risks and target-error bound quantities for binary labelers.
//
// Notation used below: f_S and f_T are the source and target labeling
// functions, h a hypothesis returning P(label = 1), and
//   R_D(h, f) = mean over D of BCE(h(x), f(x)).
// Because BCE(h, y) = -y * logit(h) - log(1 - h), the difference
//   R_D(h, f_T) - R_D(h, f_S) = mean(-(f_T - f_S)(x) * logit(h(x)))
// exactly, and the target bound R_T(h, f_T) <= R_T(h, f_S) + |difference|
// is the triangle inequality.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dcl/error.hpp"
#include "dcl/linalg.hpp"
#include "dcl/losses.hpp"

namespace dcl {

inline constexpr double kProbabilityClamp = 1e-7;

// Slack for inequalities that hold exactly in real arithmetic.
inline constexpr double kBoundSlack = 1e-12;

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

inline double log_odds(double p) {
  const double q = clamp_probability(p);
  return std::log(q / (1.0 - q));
}

// Samples with the binary labels the two labelers assign to them.
struct LabeledSet {
  std::vector<Vec> features;
  std::vector<int> labels_S;
  std::vector<int> labels_T;

  std::size_t size() const { return features.size(); }
};

inline void validate(const LabeledSet& set) {
  if (set.labels_S.size() != set.features.size() ||
      set.labels_T.size() != set.features.size()) {
    throw ShapeError("LabeledSet: label and feature counts differ");
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    const int s = set.labels_S[i];
    const int t = set.labels_T[i];
    if ((s != 0 && s != 1) || (t != 0 && t != 1)) {
      throw DataError("LabeledSet: labels must be binary");
    }
  }
}

enum class Labeler { source, target };

// Probability-valued hypothesis; outputs are clamped into
// [1e-7, 1 - 1e-7] so logs and log-odds stay finite.
class Hypothesis {
 public:
  using Function = std::function<double(VecView)>;

  explicit Hypothesis(Function fn) : fn_(std::move(fn)) {}

  double operator()(VecView x) const { return clamp_probability(fn_(x)); }

  static Hypothesis constant(double p) {
    return Hypothesis([p](VecView) { return p; });
  }

 private:
  Function fn_;
};

inline const std::vector<int>& labels_of(const LabeledSet& set, Labeler who) {
  return who == Labeler::source ? set.labels_S : set.labels_T;
}

inline double bce_risk(const Hypothesis& h, const LabeledSet& set,
                       Labeler which) {
  validate(set);
  if (set.size() == 0) throw DomainError("bce_risk: empty set");
  const std::vector<int>& y = labels_of(set, which);
  double acc = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double p = h(set.features[i]);
    acc += y[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return acc / static_cast<double>(set.size());
}

// Signed mean of -f'(x) logit(h(x)), with f' = f_T - f_S. Its absolute value
// is the risk difference.
inline double signed_risk_difference(const Hypothesis& h,
                                     const LabeledSet& set) {
  validate(set);
  if (set.size() == 0) throw DomainError("risk_difference: empty set");
  double acc = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const int f_prime = set.labels_T[i] - set.labels_S[i];
    if (f_prime == 0) continue;
    acc += -static_cast<double>(f_prime) * log_odds(h(set.features[i]));
  }
  return acc / static_cast<double>(set.size());
}

inline double risk_difference(const Hypothesis& h, const LabeledSet& set) {
  return std::abs(signed_risk_difference(h, set));
}

// Similarity-softmax average of the source labels f_S:
//   sum_j f_S(x_j) exp(sim(x, x_j) / tau) / sum_j exp(sim(x, x_j) / tau)
// tau = 1 is the plain nearest-neighbour classifier.
inline double nn_classifier(VecView query, const LabeledSet& source,
                            double tau = 1.0) {
  if (source.size() == 0) throw DomainError("nn_classifier: empty source set");
  if (!(tau > 0.0)) throw DomainError("nn_classifier: tau must be positive");
  if (source.labels_S.size() != source.size()) {
    throw ShapeError("nn_classifier: label count differs from sample count");
  }
  const double qn = checked_norm(query, "nn_classifier");
  Vec logits(source.size());
  for (std::size_t j = 0; j < source.size(); ++j) {
    require_same_dim(query, source.features[j], "nn_classifier");
    const double sn = checked_norm(source.features[j], "nn_classifier");
    logits[j] = dot(query, source.features[j]) / (qn * sn) / tau;
  }
  const double lse = log_sum_exp(logits);
  double positive = 0.0;
  for (std::size_t j = 0; j < source.size(); ++j) {
    if (source.labels_S[j] == 1) positive += std::exp(logits[j] - lse);
  }
  return std::clamp(positive, 0.0, 1.0);
}

inline Hypothesis nn_hypothesis(LabeledSet source, double tau = 1.0) {
  auto shared = std::make_shared<const LabeledSet>(std::move(source));
  return Hypothesis([shared, tau](VecView x) {
    return nn_classifier(x, *shared, tau);
  });
}

// Exact empirical risk of the nearest-neighbour classifier on a paired batch
// (lhs) and its single-positive-pair relaxation (rhs), for both directions.
// The indicator I(x_i, x_j) is 1 iff the two labels agree, which is
// 1 - |f_S(x_i) - f_S(x_j)| for binary labels and class equality otherwise.
struct UpperBoundTerms {
  double lhs_eq10 = 0.0;  // risk of h* on side_a against side_b neighbours
  double rhs_eq10 = 0.0;
  double lhs_eq11 = 0.0;  // the same with the sides exchanged
  double rhs_eq11 = 0.0;
};

inline UpperBoundTerms dc_upper_bound_terms(const FeatureBatch& batch,
                                            const std::vector<int>& labels,
                                            double tau) {
  validate(batch);
  const std::size_t n = batch.size();
  if (labels.size() != n) {
    throw ShapeError("dc_upper_bound_terms: label count differs from pairs");
  }
  if (n == 0) throw DomainError("dc_upper_bound_terms: empty batch");
  if (!(tau > 0.0)) throw DomainError("dc_upper_bound_terms: tau <= 0");

  const SimMatrix sim = pairwise_cosine(batch.side_a, batch.side_b);
  Vec logits(n), agreeing;
  agreeing.reserve(n);
  UpperBoundTerms out;
  for (int direction = 0; direction < 2; ++direction) {
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      agreeing.clear();
      for (std::size_t j = 0; j < n; ++j) {
        logits[j] = (direction == 0 ? sim(i, j) : sim(j, i)) / tau;
        if (labels[j] == labels[i]) agreeing.push_back(logits[j]);
      }
      const double lse = log_sum_exp(logits);
      lhs += lse - log_sum_exp(agreeing);
      rhs += lse - logits[i];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    (direction == 0 ? out.lhs_eq10 : out.lhs_eq11) = lhs * inv_n;
    (direction == 0 ? out.rhs_eq10 : out.rhs_eq11) = rhs * inv_n;
  }
  return out;
}

// Every risk and bound quantity of the target-error chain for one instance.
//
// The chain that tightens the bound (per-sample discriminability comparison,
// then the source-side risk difference replacing the target-side one) is only
// checked when its premise holds for every paired index i:
//   * the paired samples carry the same f' value,
//   * |logit h(x_t^i)| <= |logit h(x_s^i)|,
//   * -f' logit h is nonnegative on both samples wherever f' != 0, i.e. h
//     sides with f_S on the pair.
// Under that premise every checked inequality is a theorem, so a failure
// indicates a numerical or implementation problem.
struct RiskReport {
  double r_T_fS = 0.0;
  double r_T_fT = 0.0;
  double r_S_fS = 0.0;
  double r_S_fT = 0.0;
  double risk_diff_T = 0.0;
  double risk_diff_S = 0.0;
  double bound_eq1 = 0.0;          // r_T_fS + risk_diff_T
  double bound_eq8 = 0.0;          // r_T_fS + risk_diff_S
  double bound_eq8_relaxed = 0.0;  // r_T_fS + r_S_fT
  double dc_upper_rT = 0.0;
  double dc_upper_rS = 0.0;
  double dc_exact_rT = 0.0;
  double dc_exact_rS = 0.0;

  bool eq1_holds = false;
  bool eq5_mean_holds = false;
  bool assumption_violated = true;
  bool chain_checked = false;
  bool eq6_holds = false;
  bool eq7_holds = false;
  bool eq8_holds = false;
  bool eq8_simplification_loose = false;
  bool dc_relaxation_holds = false;

  // Inequalities that must hold on every instance.
  bool guarantees_hold() const {
    return eq1_holds && dc_relaxation_holds &&
           (!chain_checked || (eq6_holds && eq7_holds && eq8_holds));
  }
};

// source[i] and target[i] are a translated pair. batch carries the features
// used for the contrast terms, with labels for the indicator.
inline RiskReport bound_chain_report(const Hypothesis& h,
                                     const LabeledSet& source,
                                     const LabeledSet& target,
                                     const FeatureBatch& batch,
                                     const LossConfig& cfg) {
  validate(source);
  validate(target);
  validate(cfg);
  if (source.size() != target.size()) {
    throw ShapeError("bound_chain_report: source and target must be paired");
  }
  if (source.size() == 0) throw DomainError("bound_chain_report: empty sets");
  if (batch.labels.size() != batch.size()) {
    throw ShapeError("bound_chain_report: batch needs one label per pair");
  }

  RiskReport r;
  r.r_T_fS = bce_risk(h, target, Labeler::source);
  r.r_T_fT = bce_risk(h, target, Labeler::target);
  r.r_S_fS = bce_risk(h, source, Labeler::source);
  r.r_S_fT = bce_risk(h, source, Labeler::target);
  const double signed_t = signed_risk_difference(h, target);
  const double signed_s = signed_risk_difference(h, source);
  r.risk_diff_T = std::abs(signed_t);
  r.risk_diff_S = std::abs(signed_s);
  r.bound_eq1 = r.r_T_fS + r.risk_diff_T;
  r.bound_eq8 = r.r_T_fS + r.risk_diff_S;
  r.bound_eq8_relaxed = r.r_T_fS + r.r_S_fT;
  r.eq1_holds = r.r_T_fT <= r.bound_eq1 + kBoundSlack;
  r.eq8_simplification_loose = r.r_S_fT + kBoundSlack < r.risk_diff_S;

  const std::size_t n = source.size();
  double abs_t = 0.0, abs_s = 0.0;
  bool premise = true;
  bool per_sample_terms_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo_t = log_odds(h(target.features[i]));
    const double lo_s = log_odds(h(source.features[i]));
    abs_t += std::abs(lo_t);
    abs_s += std::abs(lo_s);
    const int fp_t = target.labels_T[i] - target.labels_S[i];
    const int fp_s = source.labels_T[i] - source.labels_S[i];
    const double term_t = -static_cast<double>(fp_t) * lo_t;
    const double term_s = -static_cast<double>(fp_s) * lo_s;
    if (fp_t != fp_s || std::abs(lo_t) > std::abs(lo_s)) premise = false;
    if (fp_s != 0 && (term_s < 0.0 || term_t < 0.0)) premise = false;
    if (term_t > term_s + kBoundSlack) per_sample_terms_ok = false;
  }
  r.eq5_mean_holds = abs_t <= abs_s;
  r.assumption_violated = !premise;
  r.chain_checked = premise;
  if (premise) {
    r.eq6_holds = per_sample_terms_ok;
    r.eq7_holds = r.risk_diff_T <= r.risk_diff_S + kBoundSlack;
    r.eq8_holds = r.r_T_fT <= r.bound_eq8 + kBoundSlack &&
                  r.bound_eq8 <= r.bound_eq8_relaxed + kBoundSlack;
  }

  const UpperBoundTerms terms =
      dc_upper_bound_terms(batch, batch.labels, cfg.tau);
  r.dc_exact_rT = terms.lhs_eq10;
  r.dc_upper_rT = terms.rhs_eq10;
  r.dc_exact_rS = terms.lhs_eq11;
  r.dc_upper_rS = terms.rhs_eq11;
  r.dc_relaxation_holds = terms.rhs_eq10 + kBoundSlack >= terms.lhs_eq10 &&
                          terms.rhs_eq11 + kBoundSlack >= terms.lhs_eq11;
  return r;
}

}  // namespace dcl
