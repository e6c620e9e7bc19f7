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

// Trainable feature adapter with a classifier head, and the training phases
// that drive it: supervised base training, cross-domain transfer with a
// pair loss, pseudo-labelling and pseudo-label fine-tuning.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dcl/datasets.hpp"
#include "dcl/error.hpp"
#include "dcl/linalg.hpp"
#include "dcl/losses.hpp"
#include "dcl/random.hpp"

namespace dcl {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "dcl-checkpoint";

// y = W x + b, W stored out x in.
struct AffineLayer {
  Matrix weights;
  Vec bias;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }

  Vec apply(VecView x) const {
    Vec y = bias;
    for (std::size_t r = 0; r < weights.rows(); ++r) y[r] += dot(weights.row(r), x);
    return y;
  }

  bool operator==(const AffineLayer&) const = default;
};

// Per-layer gradients with the same shapes as the model parameters.
struct ModelGradients {
  std::vector<AffineLayer> layers;

  double norm() const {
    double acc = 0.0;
    for (const AffineLayer& l : layers) {
      acc += squared_norm(l.weights.data());
      acc += squared_norm(l.bias);
    }
    return std::sqrt(acc);
  }
};

// Adapter layers (ReLU between consecutive layers, linear output) followed
// by an affine head producing class logits. Zero adapter layers make the
// features the raw input.
class AdapterModel {
 public:
  AdapterModel() = default;

  // hidden_widths has at most one entry. Weights are U(-1/sqrt(in),
  // 1/sqrt(in)); every bias starts at zero.
  static AdapterModel create(std::size_t input_dim,
                             const std::vector<std::size_t>& hidden_widths,
                             std::size_t feature_dim, std::size_t num_classes,
                             std::uint64_t seed) {
    if (hidden_widths.size() > 1) {
      throw DomainError("AdapterModel: at most one hidden layer");
    }
    if (input_dim == 0 || feature_dim == 0 || num_classes < 2) {
      throw DomainError("AdapterModel: invalid dimensions");
    }
    Rng rng(seed);
    AdapterModel m;
    std::size_t in = input_dim;
    for (std::size_t w : hidden_widths) {
      if (w == 0) throw DomainError("AdapterModel: zero hidden width");
      m.adapter_.push_back(random_layer(in, w, rng));
      in = w;
    }
    m.adapter_.push_back(random_layer(in, feature_dim, rng));
    m.head_ = random_layer(feature_dim, num_classes, rng);
    return m;
  }

  // Single identity adapter layer in front of a random head.
  static AdapterModel identity(std::size_t dim, std::size_t num_classes,
                               std::uint64_t seed) {
    Rng rng(seed);
    AdapterModel m;
    AffineLayer id{Matrix(dim, dim), Vec(dim, 0.0)};
    for (std::size_t k = 0; k < dim; ++k) id.weights(k, k) = 1.0;
    m.adapter_.push_back(std::move(id));
    m.head_ = random_layer(dim, num_classes, rng);
    return m;
  }

  static AdapterModel from_layers(std::vector<AffineLayer> adapter,
                                  AffineLayer head) {
    AdapterModel m;
    m.adapter_ = std::move(adapter);
    m.head_ = std::move(head);
    m.check_shapes();
    return m;
  }

  std::size_t input_dim() const {
    return adapter_.empty() ? head_.in_dim() : adapter_.front().in_dim();
  }
  std::size_t feature_dim() const { return head_.in_dim(); }
  std::size_t num_classes() const { return head_.out_dim(); }

  const std::vector<AffineLayer>& adapter_layers() const { return adapter_; }
  const AffineLayer& head() const { return head_; }

  // Intermediate activations of one adapter pass, kept for backprop.
  struct Trace {
    std::vector<Vec> inputs;  // input to each adapter layer
  };

  Vec features(VecView x) const {
    Trace unused;
    return features(x, unused);
  }

  Vec features(VecView x, Trace& trace) const {
    if (x.size() != input_dim()) {
      throw ShapeError("AdapterModel: input has dimension " +
                       std::to_string(x.size()) + ", expected " +
                       std::to_string(input_dim()));
    }
    trace.inputs.clear();
    Vec h(x.begin(), x.end());
    for (std::size_t l = 0; l < adapter_.size(); ++l) {
      trace.inputs.push_back(h);
      h = adapter_[l].apply(h);
      if (l + 1 < adapter_.size()) {
        for (double& v : h) v = v > 0.0 ? v : 0.0;
      }
    }
    return h;
  }

  Vec logits_from_features(VecView f) const { return head_.apply(f); }
  Vec logits(VecView x) const { return head_.apply(features(x)); }

  std::size_t predict(VecView x) const { return argmax(logits(x)); }

  std::vector<Vec> features_of(const std::vector<Vec>& xs) const {
    std::vector<Vec> out;
    out.reserve(xs.size());
    for (const Vec& x : xs) out.push_back(features(x));
    return out;
  }

  ModelGradients zero_gradients() const {
    ModelGradients g;
    for (const AffineLayer& l : all_layers())
      g.layers.push_back({Matrix(l.out_dim(), l.in_dim()), Vec(l.out_dim(), 0.0)});
    return g;
  }

  // Accumulates d(loss)/d(adapter params) given d(loss)/d(features).
  void backprop_features(const Trace& trace, VecView d_features,
                         ModelGradients& grads) const {
    Vec delta(d_features.begin(), d_features.end());
    for (std::size_t l = adapter_.size(); l-- > 0;) {
      const AffineLayer& layer = adapter_[l];
      const Vec& in = trace.inputs[l];
      AffineLayer& g = grads.layers[l];
      for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        if (delta[r] == 0.0) continue;
        g.bias[r] += delta[r];
        axpy(delta[r], in, g.weights.row(r));
      }
      if (l == 0) break;
      Vec prev(layer.in_dim(), 0.0);
      for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        if (delta[r] != 0.0) axpy(delta[r], layer.weights.row(r), prev);
      }
      // ReLU derivative: the stored input of layer l is the post-activation
      // output of layer l - 1.
      for (std::size_t k = 0; k < prev.size(); ++k) {
        if (!(in[k] > 0.0)) prev[k] = 0.0;
      }
      delta = std::move(prev);
    }
  }

  // Accumulates head gradients and returns d(loss)/d(features).
  Vec backprop_head(VecView features, VecView d_logits,
                    ModelGradients& grads) const {
    AffineLayer& g = grads.layers.back();
    Vec d_features(head_.in_dim(), 0.0);
    for (std::size_t r = 0; r < head_.out_dim(); ++r) {
      g.bias[r] += d_logits[r];
      axpy(d_logits[r], features, g.weights.row(r));
      axpy(d_logits[r], head_.weights.row(r), d_features);
    }
    return d_features;
  }

  // Adapter layers then the head, in gradient order.
  std::vector<AffineLayer*> mutable_layers() {
    std::vector<AffineLayer*> out;
    for (AffineLayer& l : adapter_) out.push_back(&l);
    out.push_back(&head_);
    return out;
  }

  std::vector<const AffineLayer*> all_layers_ptr() const {
    std::vector<const AffineLayer*> out;
    for (const AffineLayer& l : adapter_) out.push_back(&l);
    out.push_back(&head_);
    return out;
  }

  bool parameters_finite() const {
    for (const AffineLayer* l : all_layers_ptr()) {
      if (!all_finite(l->weights.data()) || !all_finite(l->bias)) return false;
    }
    return true;
  }

  bool operator==(const AdapterModel&) const = default;

 private:
  std::vector<AffineLayer> all_layers() const {
    std::vector<AffineLayer> out = adapter_;
    out.push_back(head_);
    return out;
  }

  static AffineLayer random_layer(std::size_t in, std::size_t out, Rng& rng) {
    AffineLayer l{Matrix(out, in), Vec(out, 0.0)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : l.weights.data()) w = rng.uniform(-bound, bound);
    return l;
  }

  void check_shapes() const {
    std::size_t prev = adapter_.empty() ? head_.in_dim() : adapter_.front().in_dim();
    for (const AffineLayer* l : all_layers_ptr()) {
      if (l->in_dim() != prev || l->bias.size() != l->out_dim()) {
        throw DataError("AdapterModel: inconsistent layer shapes");
      }
      prev = l->out_dim();
    }
  }

  std::vector<AffineLayer> adapter_;
  AffineLayer head_;
};

// Plain SGD with momentum: v = mu v + g; theta -= lr v.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum)
      : lr_(learning_rate), mu_(momentum) {}

  void step(AdapterModel& model, const ModelGradients& grads) {
    std::vector<AffineLayer*> layers = model.mutable_layers();
    if (velocity_.empty()) {
      for (const AffineLayer& g : grads.layers)
        velocity_.push_back(
            {Matrix(g.weights.rows(), g.weights.cols()), Vec(g.bias.size(), 0.0)});
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto update = [&](std::vector<double>& param, std::vector<double>& vel,
                        const std::vector<double>& grad) {
        for (std::size_t k = 0; k < param.size(); ++k) {
          vel[k] = mu_ * vel[k] + grad[k];
          param[k] -= lr_ * vel[k];
        }
      };
      update(layers[l]->weights.data(), velocity_[l].weights.data(),
             grads.layers[l].weights.data());
      update(layers[l]->bias, velocity_[l].bias, grads.layers[l].bias);
    }
  }

 private:
  double lr_;
  double mu_;
  std::vector<AffineLayer> velocity_;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 5;
  int batch_size = 32;
  double tau = 0.5;
  std::uint64_t seed = 0;
  double pseudo_label_threshold = 0.95;
};

inline void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw DomainError("momentum must lie in [0, 1)");
  }
  if (cfg.epochs < 0) throw DomainError("epochs must be >= 0");
  if (cfg.batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (!(cfg.tau > 0.0)) throw DomainError("tau must be > 0");
  if (!(cfg.pseudo_label_threshold > 0.0 && cfg.pseudo_label_threshold <= 1.0)) {
    throw DomainError("pseudo_label_threshold must lie in (0, 1]");
  }
}

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::optional<double> target_acc;
  std::optional<double> mmd;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::size_t size() const { return epochs.size(); }
  bool empty() const { return epochs.empty(); }
};

enum class TrainStatus { ok, skipped_empty };

struct TrainResult {
  AdapterModel model;
  TrainHistory history;
  TrainStatus status = TrainStatus::ok;
};

// Optional per-epoch evaluation. Pools larger than max_points are strided
// down before the MMD estimate.
struct Monitor {
  const std::vector<Vec>* source = nullptr;
  const std::vector<Vec>* target = nullptr;
  const std::vector<int>* target_labels = nullptr;
  std::size_t max_points = 300;

  bool active() const { return target != nullptr; }
};

namespace detail {

inline std::vector<Vec> strided(const std::vector<Vec>& xs, std::size_t max) {
  if (xs.size() <= max) return xs;
  std::vector<Vec> out;
  out.reserve(max);
  for (std::size_t k = 0; k < max; ++k) out.push_back(xs[k * xs.size() / max]);
  return out;
}

inline void observe(const AdapterModel& model, const Monitor& monitor,
                    EpochRecord& rec) {
  if (!monitor.active()) return;
  if (monitor.target_labels != nullptr && !monitor.target->empty()) {
    std::size_t hits = 0, counted = 0;
    for (std::size_t i = 0; i < monitor.target->size(); ++i) {
      const int y = (*monitor.target_labels)[i];
      if (y < 0) continue;
      ++counted;
      if (static_cast<int>(model.predict((*monitor.target)[i])) == y) ++hits;
    }
    if (counted > 0) {
      rec.target_acc = static_cast<double>(hits) / static_cast<double>(counted);
    }
  }
  if (monitor.source != nullptr && !monitor.source->empty() &&
      !monitor.target->empty()) {
    const auto fs = model.features_of(strided(*monitor.source, monitor.max_points));
    const auto ft = model.features_of(strided(*monitor.target, monitor.max_points));
    rec.mmd = mmd_rbf(fs, ft, median_heuristic_bandwidth(fs, ft));
  }
}

inline void check_finite(double loss, const char* phase, int epoch,
                         std::size_t step) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string(phase) + ": non-finite loss at epoch " +
                          std::to_string(epoch + 1) + ", step " +
                          std::to_string(step + 1));
  }
}

}  // namespace detail

// Multi-class softmax cross-entropy over a labeled sample list.
inline TrainResult train_cross_entropy(AdapterModel model,
                                       const std::vector<Vec>& inputs,
                                       const std::vector<int>& labels,
                                       const TrainConfig& cfg,
                                       const Monitor& monitor = {},
                                       const char* phase = "train_base") {
  validate(cfg);
  if (inputs.size() != labels.size()) {
    throw ShapeError(std::string(phase) + ": input and label counts differ");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes()) {
      throw DataError(std::string(phase) + ": label out of range");
    }
  }
  TrainResult result{std::move(model), {}, TrainStatus::ok};
  if (cfg.epochs == 0) return result;
  const std::size_t batch =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), inputs.size());
  if (batch == 0) throw DomainError(std::string(phase) + ": no training data");

  Rng rng(cfg.seed);
  SgdMomentum opt(cfg.learning_rate, cfg.momentum);
  AdapterModel& m = result.model;
  AdapterModel::Trace trace;
  Vec probs(m.num_classes());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = batch_indices(inputs.size(), batch, rng);
    double loss_sum = 0.0, grad_sum = 0.0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      ModelGradients grads = m.zero_gradients();
      const double inv_b = 1.0 / static_cast<double>(batches[step].size());
      double loss = 0.0;
      for (std::size_t idx : batches[step]) {
        const Vec f = m.features(inputs[idx], trace);
        const Vec z = m.logits_from_features(f);
        if (!all_finite(z)) {
          throw DivergenceError(std::string(phase) + ": non-finite logits at epoch " +
                                std::to_string(epoch + 1) + ", step " +
                                std::to_string(step + 1));
        }
        softmax(z, probs);
        const auto y = static_cast<std::size_t>(labels[idx]);
        loss += -std::log(std::max(probs[y], 1e-300)) * inv_b;
        Vec dz(probs.begin(), probs.end());
        dz[y] -= 1.0;
        for (double& v : dz) v *= inv_b;
        const Vec df = m.backprop_head(f, dz, grads);
        m.backprop_features(trace, df, grads);
      }
      detail::check_finite(loss, phase, epoch, step);
      loss_sum += loss;
      grad_sum += grads.norm();
      opt.step(m, grads);
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / static_cast<double>(batches.size());
    rec.grad_norm = grad_sum / static_cast<double>(batches.size());
    detail::observe(m, monitor, rec);
    result.history.epochs.push_back(rec);
  }
  if (!m.parameters_finite()) {
    throw DivergenceError(std::string(phase) + ": parameters became non-finite");
  }
  return result;
}

inline TrainResult train_base(AdapterModel model, const std::vector<Vec>& inputs,
                              const std::vector<int>& labels,
                              const TrainConfig& cfg, const Monitor& monitor = {}) {
  return train_cross_entropy(std::move(model), inputs, labels, cfg, monitor,
                             "train_base");
}

enum class PairObjective { dc, triplet, mmd };

inline std::string to_string(PairObjective o) {
  switch (o) {
    case PairObjective::dc: return "dc";
    case PairObjective::triplet: return "triplet";
    case PairObjective::mmd: return "mmd";
  }
  return "dc";
}

inline PairObjective pair_objective_from_string(const std::string& s) {
  if (s == "dc") return PairObjective::dc;
  if (s == "triplet") return PairObjective::triplet;
  if (s == "mmd") return PairObjective::mmd;
  throw DataError("unknown loss '" + s + "' (expected dc, triplet or mmd)");
}

// Paired training items. Each item is a list of region vectors; at image
// level every item holds exactly one vector (the image feature). a_items[p.a]
// is the translated counterpart of b_items[p.b].
struct PairedInputs {
  std::vector<std::vector<Vec>> a_items;
  std::vector<std::vector<Vec>> b_items;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  FeatureLevel level = FeatureLevel::image;

  std::size_t size() const { return pairs.size(); }
};

inline PairedInputs image_pairs(const std::vector<Vec>& side_a,
                                const std::vector<Vec>& side_b,
                                const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  PairedInputs in;
  in.level = FeatureLevel::image;
  in.a_items.reserve(side_a.size());
  in.b_items.reserve(side_b.size());
  for (const Vec& v : side_a) in.a_items.push_back({v});
  for (const Vec& v : side_b) in.b_items.push_back({v});
  in.pairs = pairs;
  return in;
}

inline PairedInputs swap_sides(const PairedInputs& in) {
  PairedInputs out;
  out.a_items = in.b_items;
  out.b_items = in.a_items;
  out.level = in.level;
  for (const auto& [a, b] : in.pairs) out.pairs.emplace_back(b, a);
  return out;
}

struct PairLossSettings {
  PairLossSettings(PairObjective o = PairObjective::dc, double t = 0.5,
                   std::optional<double> bandwidth = std::nullopt)
      : objective(o), tau(t), mmd_bandwidth(bandwidth) {}

  PairObjective objective = PairObjective::dc;
  double tau = 0.5;
  // MMD kernel bandwidth. Unset: median heuristic per batch, held constant
  // in the gradient.
  std::optional<double> mmd_bandwidth;
};

namespace detail {

struct ItemForward {
  std::vector<AdapterModel::Trace> traces;
  Vec features;  // concatenation over selected regions
};

inline ItemForward forward_item(const AdapterModel& m,
                                const std::vector<Vec>& item,
                                const std::vector<std::size_t>& selection) {
  ItemForward out;
  out.traces.resize(selection.size());
  for (std::size_t s = 0; s < selection.size(); ++s) {
    const Vec f = m.features(item[selection[s]], out.traces[s]);
    out.features.insert(out.features.end(), f.begin(), f.end());
  }
  return out;
}

inline void backward_item(const AdapterModel& m, const ItemForward& fwd,
                          VecView grad, ModelGradients& grads) {
  const std::size_t fd = m.feature_dim();
  for (std::size_t s = 0; s < fwd.traces.size(); ++s)
    m.backprop_features(fwd.traces[s], grad.subspan(s * fd, fd), grads);
}

inline LossAndGradient pair_loss(const FeatureBatch& batch,
                                 const PairLossSettings& settings) {
  switch (settings.objective) {
    case PairObjective::dc:
      return dc_loss_and_grad(batch, LossConfig{settings.tau, FeatureLevel::image});
    case PairObjective::triplet:
      return triplet_loss_and_grad(batch);
    case PairObjective::mmd: {
      const double bw = settings.mmd_bandwidth
                            ? *settings.mmd_bandwidth
                            : median_heuristic_bandwidth(batch.side_a, batch.side_b);
      MmdAndGradient r = mmd_rbf_and_grad(batch.side_a, batch.side_b, bw);
      LossAndGradient out;
      out.loss.value = r.value;
      out.grad.grad_a = std::move(r.grad_a);
      out.grad.grad_b = std::move(r.grad_b);
      return out;
    }
  }
  throw DomainError("unknown pair objective");
}

}  // namespace detail

// Gradient of a pair loss with respect to the parameters, for one batch of
// pair indices and fixed region selections.
struct PairStep {
  LossValue loss;
  ModelGradients grads;
};

inline PairStep pair_loss_step(const AdapterModel& m, const PairedInputs& data,
                               const std::vector<std::size_t>& batch,
                               const std::vector<std::vector<std::size_t>>& selections,
                               const PairLossSettings& settings) {
  std::vector<detail::ItemForward> fa, fb;
  fa.reserve(batch.size());
  fb.reserve(batch.size());
  FeatureBatch fbatch;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& [ia, ib] = data.pairs[batch[k]];
    fa.push_back(detail::forward_item(m, data.a_items[ia], selections[k]));
    fb.push_back(detail::forward_item(m, data.b_items[ib], selections[k]));
    fbatch.side_a.push_back(fa.back().features);
    fbatch.side_b.push_back(fb.back().features);
    if (!all_finite(fbatch.side_a.back()) || !all_finite(fbatch.side_b.back())) {
      throw DivergenceError("pair loss: non-finite adapter features");
    }
    if (settings.objective == PairObjective::dc &&
        (norm(fbatch.side_a.back()) == 0.0 || norm(fbatch.side_b.back()) == 0.0)) {
      throw DivergenceError("pair loss: adapter collapsed a sample to the zero vector");
    }
  }
  LossAndGradient lg = detail::pair_loss(fbatch, settings);
  PairStep out{std::move(lg.loss), m.zero_gradients()};
  for (std::size_t k = 0; k < batch.size(); ++k) {
    detail::backward_item(m, fa[k], lg.grad.grad_a[k], out.grads);
    detail::backward_item(m, fb[k], lg.grad.grad_b[k], out.grads);
  }
  return out;
}

inline std::vector<std::size_t> default_selection(const PairedInputs& data,
                                                  std::size_t pair, Rng& rng) {
  const auto& [ia, ib] = data.pairs[pair];
  const std::size_t na = data.a_items[ia].size();
  const std::size_t nb = data.b_items[ib].size();
  if (na != nb) throw ShapeError("paired items carry different region counts");
  if (data.level == FeatureLevel::image) {
    if (na != 1) throw ShapeError("image-level items must hold one vector");
    return {0};
  }
  return select_regions(na, rng);
}

// Fine-tunes every parameter on a pair loss over shuffled full batches.
// Regions are re-drawn for each pair every epoch.
inline TrainResult train_pairs(AdapterModel model, const PairedInputs& data,
                               const TrainConfig& cfg,
                               const PairLossSettings& settings,
                               const Monitor& monitor = {},
                               const char* phase = "transfer") {
  validate(cfg);
  for (const auto& [a, b] : data.pairs) {
    if (a >= data.a_items.size() || b >= data.b_items.size()) {
      throw ShapeError(std::string(phase) + ": pairing refers past the item lists");
    }
  }
  TrainResult result{std::move(model), {}, TrainStatus::ok};
  if (cfg.epochs == 0) return result;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  if (batch_size > data.size()) {
    throw DomainError(std::string(phase) + ": batch_size exceeds available pairs");
  }
  Rng rng(cfg.seed);
  SgdMomentum opt(cfg.learning_rate, cfg.momentum);
  AdapterModel& m = result.model;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = batch_indices(data.size(), batch_size, rng);
    double loss_sum = 0.0, grad_sum = 0.0;
    for (std::size_t step = 0; step < batches.size(); ++step) {
      std::vector<std::vector<std::size_t>> selections;
      selections.reserve(batches[step].size());
      for (std::size_t p : batches[step])
        selections.push_back(default_selection(data, p, rng));
      PairStep s = pair_loss_step(m, data, batches[step], selections, settings);
      detail::check_finite(s.loss.value, phase, epoch, step);
      loss_sum += s.loss.value;
      grad_sum += s.grads.norm();
      opt.step(m, s.grads);
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / static_cast<double>(batches.size());
    rec.grad_norm = grad_sum / static_cast<double>(batches.size());
    detail::observe(m, monitor, rec);
    result.history.epochs.push_back(rec);
  }
  if (!m.parameters_finite()) {
    throw DivergenceError(std::string(phase) + ": parameters became non-finite");
  }
  return result;
}

// Source -> target transfer: side a holds the translated counterparts x_{s->t},
// side b the source samples x_s. The region level uses the region items.
inline TrainResult transfer_s_to_t(AdapterModel model, const PairedInputs& data,
                                   const TrainConfig& cfg,
                                   const Monitor& monitor = {}) {
  return train_pairs(std::move(model), data, cfg,
                     {PairObjective::dc, cfg.tau}, monitor, "transfer_s_to_t");
}

// Target -> source transfer: side a holds target samples x_t, side b their
// translations x_{t->s}.
inline TrainResult transfer_t_to_s(AdapterModel model, const PairedInputs& data,
                                   const TrainConfig& cfg,
                                   const Monitor& monitor = {}) {
  return train_pairs(std::move(model), data, cfg,
                     {PairObjective::dc, cfg.tau}, monitor, "transfer_t_to_s");
}

struct PseudoLabels {
  std::vector<std::size_t> indices;  // into the scored feature list
  std::vector<int> labels;
  std::vector<double> confidence;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

// Keeps samples whose maximum softmax probability reaches the threshold,
// labelled with the argmax class.
inline PseudoLabels pseudo_label(const AdapterModel& model,
                                 const std::vector<Vec>& unlabeled,
                                 double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw DomainError("pseudo_label: threshold must lie in (0, 1]");
  }
  PseudoLabels out;
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    const Vec p = softmax(model.logits(unlabeled[i]));
    const std::size_t k = argmax(p);
    if (p[k] >= threshold) {
      out.indices.push_back(i);
      out.labels.push_back(static_cast<int>(k));
      out.confidence.push_back(p[k]);
    }
  }
  return out;
}

// Cross-entropy fine-tuning on pseudo-labelled samples. An empty set is a
// no-op reported through the status, not an error.
inline TrainResult finetune_pseudo(AdapterModel model,
                                   const std::vector<Vec>& inputs,
                                   const std::vector<int>& labels,
                                   const TrainConfig& cfg,
                                   const Monitor& monitor = {}) {
  validate(cfg);
  if (inputs.empty()) {
    return TrainResult{std::move(model), {}, TrainStatus::skipped_empty};
  }
  return train_cross_entropy(std::move(model), inputs, labels, cfg, monitor,
                             "finetune_pseudo");
}

// Linear search over candidate learning rates: each candidate trains a copy
// of the starting model with the supplied routine, and the one with the
// lowest finite final-epoch loss wins (ties go to the earlier candidate).
inline double calibrate_learning_rate(
    const std::vector<double>& candidates,
    const std::function<TrainHistory(double)>& run) {
  if (candidates.empty()) throw DomainError("calibrate_learning_rate: no candidates");
  double best_lr = candidates.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (double lr : candidates) {
    double final_loss = std::numeric_limits<double>::infinity();
    try {
      const TrainHistory h = run(lr);
      if (!h.empty()) final_loss = h.epochs.back().loss;
    } catch (const DivergenceError&) {
    }
    if (std::isfinite(final_loss) && final_loss < best_loss) {
      best_loss = final_loss;
      best_lr = lr;
    }
  }
  return best_lr;
}

// ---- serialization ----------------------------------------------------------

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"tau", c.tau},
          {"seed", c.seed},
          {"pseudo_label_threshold", c.pseudo_label_threshold}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j,
                                          TrainConfig base = {}) {
  if (!j.is_object()) throw DataError("train config must be a JSON object");
  base.learning_rate = j.value("learning_rate", base.learning_rate);
  base.momentum = j.value("momentum", base.momentum);
  base.epochs = j.value("epochs", base.epochs);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.tau = j.value("tau", base.tau);
  base.seed = j.value("seed", base.seed);
  base.pseudo_label_threshold =
      j.value("pseudo_label_threshold", base.pseudo_label_threshold);
  return base;
}

inline nlohmann::json layer_to_json(const AffineLayer& l) {
  return {{"rows", l.weights.rows()},
          {"cols", l.weights.cols()},
          {"weights", l.weights.data()},
          {"bias", l.bias}};
}

inline AffineLayer layer_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  AffineLayer l{Matrix(rows, cols), j.at("bias").get<Vec>()};
  const Vec w = j.at("weights").get<Vec>();
  if (w.size() != rows * cols || l.bias.size() != rows) {
    throw DataError("checkpoint: layer arrays do not match declared shape");
  }
  l.weights.data() = w;
  return l;
}

inline nlohmann::json checkpoint_to_json(const AdapterModel& m,
                                         const nlohmann::json& config_echo = nullptr) {
  nlohmann::json layers = nlohmann::json::array();
  for (const AffineLayer& l : m.adapter_layers()) layers.push_back(layer_to_json(l));
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"activation", "relu"},
          {"adapter", layers},
          {"head", layer_to_json(m.head())},
          {"config", config_echo}};
}

inline AdapterModel checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
      throw DataError("checkpoint: not a dcl checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    std::vector<AffineLayer> adapter;
    for (const auto& l : j.at("adapter")) adapter.push_back(layer_from_json(l));
    AdapterModel m = AdapterModel::from_layers(std::move(adapter),
                                               layer_from_json(j.at("head")));
    if (!m.parameters_finite()) throw DataError("checkpoint: non-finite parameters");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

inline std::string format_optional(const std::optional<double>& v) {
  if (!v) return "";
  nlohmann::json j = *v;
  return j.dump();
}

// CSV with columns epoch,loss,grad_norm,target_acc,mmd; missing monitor
// values are left empty.
inline std::string history_to_csv(const TrainHistory& h) {
  std::string out = "epoch,loss,grad_norm,target_acc,mmd\n";
  for (const EpochRecord& r : h.epochs) {
    out += std::to_string(r.epoch) + "," + nlohmann::json(r.loss).dump() + "," +
           nlohmann::json(r.grad_norm).dump() + "," + format_optional(r.target_acc) +
           "," + format_optional(r.mmd) + "\n";
  }
  return out;
}

}  // namespace dcl
