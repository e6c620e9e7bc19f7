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

// Experiment lifecycle: configuration, the phase schedule (base training,
// source->target image and region transfer, target->source transfer and
// pseudo-label fine-tuning), risk reports, ablations and loss comparisons.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dcl/adapter.hpp"
#include "dcl/datasets.hpp"
#include "dcl/error.hpp"
#include "dcl/losses.hpp"
#include "dcl/metrics.hpp"
#include "dcl/random.hpp"
#include "dcl/risk_bounds.hpp"

namespace dcl {

inline constexpr const char* kToolkitName = "dcl";
inline constexpr const char* kToolkitVersion = "1.0.0";

enum class Phase { base, st_image, st_region, ts_image, ts_pseudo };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::base: return "base";
    case Phase::st_image: return "st_image";
    case Phase::st_region: return "st_region";
    case Phase::ts_image: return "ts_image";
    case Phase::ts_pseudo: return "ts_pseudo";
  }
  return "base";
}

inline Phase phase_from_string(const std::string& s) {
  if (s == "base") return Phase::base;
  if (s == "st_image") return Phase::st_image;
  if (s == "st_region") return Phase::st_region;
  if (s == "ts_image") return Phase::ts_image;
  if (s == "ts_pseudo") return Phase::ts_pseudo;
  throw DataError("unknown phase '" + s + "'");
}

struct PhaseSpec {
  PhaseSpec() = default;
  PhaseSpec(Phase p) : phase(p) {}  // NOLINT(google-explicit-constructor)

  Phase phase = Phase::base;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  bool auto_learning_rate = false;
  PairObjective objective = PairObjective::dc;
};

struct ModelSpec {
  std::vector<std::size_t> hidden_widths{32};
  std::size_t feature_dim = 8;
};

struct DatasetConfig {
  std::optional<SyntheticDomainSpec> synthetic;
  std::vector<std::string> files;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  TrainConfig train;  // transfer phases; base and pseudo phases override below
  LossConfig loss;
  ModelSpec model;
  std::vector<PhaseSpec> phases;
  std::string output_dir;
  std::uint64_t seed = 0;

  int base_epochs = 20;
  double base_learning_rate = 0.05;
  int base_batch_size = 32;
  int pseudo_epochs = 5;
  double pseudo_learning_rate = 0.02;

  int positive_class = 0;           // binary task of the risk report
  std::size_t bound_samples = 500;  // pairs used by the risk report
  std::vector<double> lr_candidates{0.005, 0.01, 0.02, 0.05, 0.1};
};

// The benchmark used throughout the tests: three classes in eight
// dimensions, rotated in every coordinate plane and translated.
inline SyntheticDomainSpec standard_benchmark_spec() {
  SyntheticDomainSpec s;
  s.num_classes = 3;
  s.dim = 8;
  s.radius = 3.0;
  s.noise_sigma = 1.0;
  s.shift.rotation_angles = {0.9, 0.9, 0.9, 0.9};
  s.shift.translation = {1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0};
  s.shift.scale = 1.0;
  s.samples_per_domain = 2000;
  return s;
}

// Two classes mixed 1:9.
inline SyntheticDomainSpec imbalanced_benchmark_spec() {
  SyntheticDomainSpec s = standard_benchmark_spec();
  s.num_classes = 2;
  s.class_mixture = {0.1, 0.9};
  return s;
}

inline std::vector<PhaseSpec> phases_from_names(const std::vector<std::string>& names) {
  std::vector<PhaseSpec> out;
  for (const std::string& n : names) out.push_back({phase_from_string(n)});
  return out;
}

inline std::vector<PhaseSpec> full_schedule() {
  return phases_from_names({"base", "st_image", "st_region", "ts_image", "ts_pseudo"});
}

// Calibrated schedule for the standard benchmark. Once the image-level phase
// has aligned the domains, the later contrastive phases only refine (small
// rates, two epochs): with the head frozen during pair losses, longer runs
// drift the features away from what the head reads.
inline std::vector<PhaseSpec> calibrated_schedule() {
  std::vector<PhaseSpec> p = full_schedule();
  for (PhaseSpec& s : p) {
    if (s.phase == Phase::st_region || s.phase == Phase::ts_image) {
      s.learning_rate = 0.002;
      s.epochs = 2;
    }
  }
  return p;
}

inline ExperimentConfig standard_config(std::uint64_t seed = 0) {
  ExperimentConfig c;
  c.dataset.synthetic = standard_benchmark_spec();
  c.phases = calibrated_schedule();
  c.train.learning_rate = 0.01;
  c.loss.tau = 1.0;
  c.train.tau = 1.0;
  c.pseudo_learning_rate = 0.01;
  c.seed = seed;
  return c;
}

// Settings shared by every loss in the imbalance comparison. The rate is the
// largest candidate at which the triplet baseline stays finite on the 1:9
// benchmark (it diverges at 0.01 and 0.002).
inline ExperimentConfig imbalance_config(std::uint64_t seed = 0) {
  ExperimentConfig c = standard_config(seed);
  c.dataset.synthetic = imbalanced_benchmark_spec();
  c.train.learning_rate = 0.001;
  c.phases = {Phase::base, Phase::st_image};
  return c;
}

// ---- config JSON -----------------------------------------------------------

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json dataset = nlohmann::json::object();
  if (c.dataset.synthetic) dataset["synthetic"] = to_json(*c.dataset.synthetic);
  if (!c.dataset.files.empty()) dataset["files"] = c.dataset.files;
  nlohmann::json phases = nlohmann::json::array();
  for (const PhaseSpec& p : c.phases) {
    nlohmann::json pj = {{"name", to_string(p.phase)}};
    if (p.epochs) pj["epochs"] = *p.epochs;
    if (p.auto_learning_rate) {
      pj["learning_rate"] = "auto";
    } else if (p.learning_rate) {
      pj["learning_rate"] = *p.learning_rate;
    }
    if (p.objective != PairObjective::dc) pj["loss"] = to_string(p.objective);
    phases.push_back(pj);
  }
  return {{"dataset", dataset},
          {"train", to_json(c.train)},
          {"loss", {{"tau", c.loss.tau}}},
          {"model", {{"hidden_widths", c.model.hidden_widths},
                     {"feature_dim", c.model.feature_dim}}},
          {"phases", phases},
          {"output_dir", c.output_dir},
          {"seed", c.seed},
          {"base",
           {{"epochs", c.base_epochs},
            {"learning_rate", c.base_learning_rate},
            {"batch_size", c.base_batch_size}}},
          {"pseudo", {{"epochs", c.pseudo_epochs}, {"learning_rate", c.pseudo_learning_rate}}},
          {"positive_class", c.positive_class},
          {"bound_samples", c.bound_samples},
          {"lr_candidates", c.lr_candidates}};
}

inline PhaseSpec phase_spec_from_json(const nlohmann::json& j) {
  if (j.is_string()) return {phase_from_string(j.get<std::string>())};
  PhaseSpec p{phase_from_string(j.at("name").get<std::string>())};
  if (j.contains("epochs")) p.epochs = j.at("epochs").get<int>();
  if (j.contains("learning_rate")) {
    const auto& lr = j.at("learning_rate");
    if (lr.is_string()) {
      if (lr.get<std::string>() != "auto") throw DataError("learning_rate must be a number or \"auto\"");
      p.auto_learning_rate = true;
    } else {
      p.learning_rate = lr.get<double>();
    }
  }
  if (j.contains("loss")) p.objective = pair_objective_from_string(j.at("loss").get<std::string>());
  return p;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  // Omitted fields keep the standard experiment's values.
  ExperimentConfig c = standard_config();
  try {
    if (!j.is_object()) throw DataError("config must be a JSON object");
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      c.dataset = {};
      if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        if (s.is_string()) {
          const std::string name = s.get<std::string>();
          if (name == "standard") {
            c.dataset.synthetic = standard_benchmark_spec();
          } else if (name == "imbalanced") {
            c.dataset.synthetic = imbalanced_benchmark_spec();
          } else {
            throw DataError("config: unknown synthetic preset '" + name + "'");
          }
        } else {
          c.dataset.synthetic = synthetic_spec_from_json(s, standard_benchmark_spec());
        }
      }
      if (d.contains("files")) c.dataset.files = d.at("files").get<std::vector<std::string>>();
    }
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    if (j.contains("loss")) c.loss.tau = j.at("loss").value("tau", c.loss.tau);
    c.train.tau = c.loss.tau;
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model.hidden_widths = m.value("hidden_widths", c.model.hidden_widths);
      c.model.feature_dim = m.value("feature_dim", c.model.feature_dim);
    }
    if (j.contains("phases")) {
      c.phases.clear();
      for (const auto& p : j.at("phases")) c.phases.push_back(phase_spec_from_json(p));
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", c.seed);
    if (j.contains("base")) {
      c.base_epochs = j.at("base").value("epochs", c.base_epochs);
      c.base_learning_rate = j.at("base").value("learning_rate", c.base_learning_rate);
      c.base_batch_size = j.at("base").value("batch_size", c.base_batch_size);
    }
    if (j.contains("pseudo")) {
      c.pseudo_epochs = j.at("pseudo").value("epochs", c.pseudo_epochs);
      c.pseudo_learning_rate = j.at("pseudo").value("learning_rate", c.pseudo_learning_rate);
    }
    c.positive_class = j.value("positive_class", c.positive_class);
    c.bound_samples = j.value("bound_samples", c.bound_samples);
    c.lr_candidates = j.value("lr_candidates", c.lr_candidates);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (c.phases.empty()) throw DataError("config: phase list is empty");
  if (!c.dataset.synthetic && c.dataset.files.empty()) {
    throw DataError("config: dataset needs a synthetic block or files");
  }
  validate(c.loss);
  validate(c.train);
  return c;
}

// ---- data ------------------------------------------------------------------

inline PairedDomains load_dataset(const ExperimentConfig& c) {
  if (!c.dataset.files.empty()) return load_features(c.dataset.files);
  return generate(*c.dataset.synthetic, derive_seed(c.seed, 1));
}

inline std::size_t class_count(const ExperimentConfig& c, const PairedDomains& data) {
  if (c.dataset.synthetic && c.dataset.files.empty()) {
    return static_cast<std::size_t>(c.dataset.synthetic->num_classes);
  }
  int max_label = -1;
  for (int y : data.source.labels) max_label = std::max(max_label, y);
  for (int y : data.target.labels) max_label = std::max(max_label, y);
  return static_cast<std::size_t>(std::max(max_label + 1, 2));
}

inline AdapterModel initial_model(const ExperimentConfig& c, const PairedDomains& data) {
  const std::size_t dim = data.source.empty() ? data.target.dim() : data.source.dim();
  if (dim == 0) throw DataError("dataset has no samples");
  return AdapterModel::create(dim, c.model.hidden_widths, c.model.feature_dim,
                              class_count(c, data), derive_seed(c.seed, 2));
}

inline PairedInputs st_inputs(const PairedDomains& d, FeatureLevel level) {
  if (level == FeatureLevel::image) {
    return image_pairs(d.source_to_target.features, d.source.features, d.s_to_t_pairs());
  }
  PairedInputs in;
  in.level = FeatureLevel::region;
  for (const RegionGroup& g : d.source_to_target.regions) in.a_items.push_back(g.region_features);
  for (const RegionGroup& g : d.source.regions) in.b_items.push_back(g.region_features);
  in.pairs = d.s_to_t_pairs();
  return in;
}

inline PairedInputs ts_inputs(const PairedDomains& d) {
  return image_pairs(d.target.features, d.target_to_source.features, d.t_to_s_pairs());
}

// ---- phases ----------------------------------------------------------------

struct PhaseResult {
  Phase phase = Phase::base;
  TrainHistory history;
  TrainStatus status = TrainStatus::ok;
  TrainConfig config;
  std::size_t pseudo_count = 0;
  std::optional<double> pseudo_precision;
  EvalReport eval;
};

inline TrainConfig phase_config(const ExperimentConfig& c, const PhaseSpec& p,
                                std::size_t index) {
  TrainConfig t = c.train;
  t.tau = c.loss.tau;
  t.seed = derive_seed(c.seed, 100 + index);
  if (p.phase == Phase::base) {
    t.epochs = c.base_epochs;
    t.learning_rate = c.base_learning_rate;
    t.batch_size = c.base_batch_size;
  } else if (p.phase == Phase::ts_pseudo) {
    t.epochs = c.pseudo_epochs;
    t.learning_rate = c.pseudo_learning_rate;
  }
  if (p.epochs) t.epochs = *p.epochs;
  if (p.learning_rate) t.learning_rate = *p.learning_rate;
  return t;
}

inline std::pair<std::vector<Vec>, std::vector<int>> labeled_only(const DomainSet& set) {
  std::pair<std::vector<Vec>, std::vector<int>> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] < 0) continue;
    out.first.push_back(set.features[i]);
    out.second.push_back(set.labels[i]);
  }
  return out;
}

namespace detail {

inline TrainResult run_training(const AdapterModel& model, const PairedDomains& data,
                                const PhaseSpec& p, const TrainConfig& t,
                                const Monitor& monitor, PhaseResult& out) {
  switch (p.phase) {
    case Phase::base: {
      const auto [xs, ys] = labeled_only(data.source);
      return train_base(model, xs, ys, t, monitor);
    }
    case Phase::st_image:
    case Phase::st_region: {
      const FeatureLevel level =
          p.phase == Phase::st_image ? FeatureLevel::image : FeatureLevel::region;
      return train_pairs(model, st_inputs(data, level), t, {p.objective, t.tau}, monitor,
                         p.phase == Phase::st_image ? "st_image" : "st_region");
    }
    case Phase::ts_image:
      return train_pairs(model, ts_inputs(data), t, {p.objective, t.tau}, monitor, "ts_image");
    case Phase::ts_pseudo: {
      // Score the source-style translations of the target samples, then
      // fine-tune on the target originals with the confident labels.
      const PseudoLabels pl =
          pseudo_label(model, data.target_to_source.features, t.pseudo_label_threshold);
      std::vector<Vec> xs;
      std::vector<int> ys;
      std::size_t correct = 0, known = 0;
      for (std::size_t k = 0; k < pl.size(); ++k) {
        const std::size_t ti = data.t_to_s_of[pl.indices[k]];
        xs.push_back(data.target.features[ti]);
        ys.push_back(pl.labels[k]);
        if (data.target.labels[ti] >= 0) {
          ++known;
          if (data.target.labels[ti] == pl.labels[k]) ++correct;
        }
      }
      out.pseudo_count = pl.size();
      if (known > 0) out.pseudo_precision = static_cast<double>(correct) / static_cast<double>(known);
      return finetune_pseudo(model, xs, ys, t, monitor);
    }
  }
  throw DomainError("unknown phase");
}

}  // namespace detail

// Runs one phase on `model` and evaluates the result.
inline PhaseResult run_phase(AdapterModel& model, const PairedDomains& data,
                             const ExperimentConfig& c, const PhaseSpec& p,
                             std::size_t index) {
  PhaseResult out;
  out.phase = p.phase;
  TrainConfig t = phase_config(c, p, index);
  const Monitor monitor{&data.source.features, &data.target.features, &data.target.labels};
  if (p.auto_learning_rate) {
    t.learning_rate = calibrate_learning_rate(c.lr_candidates, [&](double lr) {
      TrainConfig probe = t;
      probe.learning_rate = lr;
      probe.epochs = 1;
      PhaseResult scratch;
      return detail::run_training(model, data, p, probe, {}, scratch).history;
    });
  }
  out.config = t;
  TrainResult r = detail::run_training(model, data, p, t, monitor, out);
  model = std::move(r.model);
  out.history = std::move(r.history);
  out.status = r.status;
  out.eval = evaluate(model, data);
  return out;
}

// ---- risk report -----------------------------------------------------------

namespace detail {

// Nearest class centroid over the labeled samples of one domain, reduced to
// the binary task "class == positive".
class CentroidLabeler {
 public:
  CentroidLabeler(const DomainSet& set, std::size_t num_classes, int positive)
      : positive_(positive) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      auto center = class_center(set.features, set.labels, static_cast<int>(c));
      if (center) {
        centers_.push_back(std::move(*center));
        classes_.push_back(static_cast<int>(c));
      }
    }
    if (centers_.empty()) throw DataError("risk report: domain has no labeled samples");
  }

  int operator()(VecView x) const {
    std::size_t best = 0;
    double best_d = squared_distance(x, centers_[0]);
    for (std::size_t k = 1; k < centers_.size(); ++k) {
      const double d = squared_distance(x, centers_[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return classes_[best] == positive_ ? 1 : 0;
  }

 private:
  int positive_;
  std::vector<Vec> centers_;
  std::vector<int> classes_;
};

}  // namespace detail

// Risk report for the nearest-neighbour classifier built on adapter outputs.
// f_S and f_T are the nearest-centroid rules of the labeled source and target
// originals (input space), for the binary task class == positive_class. The
// paired sets are source samples and their target-style translations.
inline RiskReport build_risk_report(const AdapterModel& model, const PairedDomains& data,
                                    const ExperimentConfig& c) {
  if (data.s_to_t_of.empty()) {
    throw DataError("risk report needs source-to-target translations");
  }
  const std::size_t k = std::max(model.num_classes(), class_count(c, data));
  const detail::CentroidLabeler f_s(data.source, k, c.positive_class);
  const detail::CentroidLabeler f_t(data.target, k, c.positive_class);
  const auto idx = detail::strided_indices(data.s_to_t_of.size(), c.bound_samples);

  LabeledSet source, target;
  FeatureBatch batch;
  for (std::size_t kk : idx) {
    const Vec& xs = data.source.features[data.s_to_t_of[kk]];
    const Vec& xt = data.source_to_target.features[kk];
    Vec gs = model.features(xs);
    Vec gt = model.features(xt);
    if (norm(gs) == 0.0 || norm(gt) == 0.0) {
      throw DivergenceError("risk report: adapter collapsed a sample to the zero vector");
    }
    // A translation carries the annotation of its original, so both members
    // of a pair share labels: f_S read on the source member, f_T on the
    // target-style member.
    const int ys = f_s(xs);
    const int yt = f_t(xt);
    source.features.push_back(gs);
    source.labels_S.push_back(ys);
    source.labels_T.push_back(yt);
    target.features.push_back(gt);
    target.labels_S.push_back(ys);
    target.labels_T.push_back(yt);
    batch.side_a.push_back(std::move(gt));
    batch.side_b.push_back(std::move(gs));
    batch.labels.push_back(data.source.labels[data.s_to_t_of[kk]]);
  }
  const Hypothesis h = nn_hypothesis(source, c.loss.tau);
  return bound_chain_report(h, source, target, batch, c.loss);
}

inline nlohmann::json to_json(const RiskReport& r) {
  return {{"r_T_fS", r.r_T_fS},
          {"r_T_fT", r.r_T_fT},
          {"r_S_fS", r.r_S_fS},
          {"r_S_fT", r.r_S_fT},
          {"risk_diff_T", r.risk_diff_T},
          {"risk_diff_S", r.risk_diff_S},
          {"bound_eq1", r.bound_eq1},
          {"bound_eq8", r.bound_eq8},
          {"bound_eq8_relaxed", r.bound_eq8_relaxed},
          {"dc_upper_rT", r.dc_upper_rT},
          {"dc_upper_rS", r.dc_upper_rS},
          {"dc_exact_rT", r.dc_exact_rT},
          {"dc_exact_rS", r.dc_exact_rS},
          {"eq1_holds", r.eq1_holds},
          {"eq5_mean_holds", r.eq5_mean_holds},
          {"assumption_violated", r.assumption_violated},
          {"chain_checked", r.chain_checked},
          {"eq6_holds", r.eq6_holds},
          {"eq7_holds", r.eq7_holds},
          {"eq8_holds", r.eq8_holds},
          {"eq8_simplification_loose", r.eq8_simplification_loose},
          {"dc_relaxation_holds", r.dc_relaxation_holds}};
}

// ---- full runs -------------------------------------------------------------

struct RunOutcome {
  AdapterModel model;
  std::vector<PhaseResult> phases;
  RiskReport risk;
  bool has_risk = false;
};

inline RunOutcome run_experiment(const ExperimentConfig& c, const PairedDomains& data) {
  RunOutcome out;
  out.model = initial_model(c, data);
  for (std::size_t i = 0; i < c.phases.size(); ++i)
    out.phases.push_back(run_phase(out.model, data, c, c.phases[i], i));
  if (!data.s_to_t_of.empty()) {
    out.risk = build_risk_report(out.model, data, c);
    out.has_risk = true;
  }
  return out;
}

inline RunOutcome run_experiment(const ExperimentConfig& c) {
  return run_experiment(c, load_dataset(c));
}

inline nlohmann::json manifest(const ExperimentConfig& c, const std::string& command) {
  return {{"toolkit", kToolkitName},
          {"version", kToolkitVersion},
          {"command", command},
          {"seed", c.seed},
          {"config", to_json(c)}};
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  write_text(p.string(), j.dump(2) + "\n");
}

inline std::string phase_summary_csv(const std::vector<PhaseResult>& phases) {
  std::string out =
      "index,phase,target_accuracy,target_nn_accuracy,source_accuracy,minority_recall,"
      "nn_minority_recall,mmd_source_target,mean_positive_pair_cosine,mean_offdiag_cosine,"
      "pseudo_count\n";
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const EvalReport& e = phases[i].eval;
    out += std::to_string(i) + "," + to_string(phases[i].phase) + "," +
           format_double(e.target_accuracy) + "," + format_double(e.target_nn_accuracy) + "," +
           format_double(e.source_accuracy) + "," + format_double(e.minority_recall) + "," +
           format_double(e.nn_minority_recall) + "," + format_double(e.mmd_source_target) + "," +
           format_double(e.mean_positive_pair_cosine) + "," +
           format_double(e.mean_offdiag_cosine) + "," + std::to_string(phases[i].pseudo_count) +
           "\n";
  }
  return out;
}

// Writes checkpoints, histories and reports under `dir`. Each phase gets a
// numbered subdirectory; the final model and reports sit at the top level.
inline void write_run_artifacts(const ExperimentConfig& c, const RunOutcome& run,
                                const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const nlohmann::json echo = to_json(c);
  for (std::size_t i = 0; i < run.phases.size(); ++i) {
    const PhaseResult& p = run.phases[i];
    const fs::path sub = dir / (std::to_string(i) + "_" + to_string(p.phase));
    fs::create_directories(sub);
    write_text((sub / "history.csv").string(), history_to_csv(p.history));
    nlohmann::json ev = to_json(p.eval);
    ev["phase"] = to_string(p.phase);
    ev["status"] = p.status == TrainStatus::ok ? "ok" : "skipped_empty";
    ev["train_config"] = to_json(p.config);
    if (p.phase == Phase::ts_pseudo) {
      ev["pseudo_count"] = p.pseudo_count;
      ev["pseudo_precision"] =
          p.pseudo_precision ? nlohmann::json(*p.pseudo_precision) : nlohmann::json(nullptr);
    }
    write_json(sub / "eval.json", ev);
  }
  write_json(dir / "checkpoint.json", checkpoint_to_json(run.model, echo));
  if (!run.phases.empty()) write_json(dir / "eval.json", to_json(run.phases.back().eval));
  if (run.has_risk) write_json(dir / "risk_report.json", to_json(run.risk));
  write_text((dir / "summary.csv").string(), phase_summary_csv(run.phases));
}

// ---- ablation --------------------------------------------------------------

enum class AblationAxis { tau, lr, batch };

inline AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "tau") return AblationAxis::tau;
  if (s == "lr") return AblationAxis::lr;
  if (s == "batch") return AblationAxis::batch;
  throw DataError("unknown ablation axis '" + s + "' (expected tau, lr or batch)");
}

inline std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::tau: return "tau";
    case AblationAxis::lr: return "lr";
    case AblationAxis::batch: return "batch";
  }
  return "tau";
}

inline std::vector<double> default_ablation_grid(AblationAxis a) {
  switch (a) {
    case AblationAxis::tau: return {0.1, 0.5, 1.0, 5.0};
    case AblationAxis::lr: return {0.005, 0.01, 0.02, 0.05, 0.1};
    case AblationAxis::batch: return {2, 4, 8, 16, 32};
  }
  return {};
}

struct AblationRow {
  double value = 0.0;
  EvalReport eval;
  double final_loss = 0.0;
};

inline ExperimentConfig with_axis_value(const ExperimentConfig& c, AblationAxis axis, double v) {
  ExperimentConfig out = c;
  switch (axis) {
    case AblationAxis::tau:
      out.loss.tau = v;
      out.train.tau = v;
      break;
    case AblationAxis::lr:
      out.train.learning_rate = v;
      break;
    case AblationAxis::batch:
      if (!(v >= 1.0) || v != std::floor(v)) {
        throw DomainError("ablate: batch sizes must be positive integers");
      }
      out.train.batch_size = static_cast<int>(v);
      break;
  }
  validate(out.loss);
  validate(out.train);
  return out;
}

// One full run per value with every other setting fixed. The lr and batch
// axes act on the transfer and pseudo-label phases, not on base training.
// Every value is validated before the first run.
inline std::vector<AblationRow> ablate(const ExperimentConfig& c, AblationAxis axis,
                                       const std::vector<double>& values,
                                       const PairedDomains& data) {
  if (values.size() < 2) throw DomainError("ablate: need at least two values");
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(with_axis_value(c, axis, v));
  std::vector<AblationRow> rows;
  for (std::size_t n = 0; n < values.size(); ++n) {
    const double v = values[n];
    const ExperimentConfig& run_cfg = configs[n];
    RunOutcome run;
    run.model = initial_model(run_cfg, data);
    for (std::size_t i = 0; i < run_cfg.phases.size(); ++i)
      run.phases.push_back(run_phase(run.model, data, run_cfg, run_cfg.phases[i], i));
    AblationRow row;
    row.value = v;
    row.eval = run.phases.back().eval;
    const TrainHistory& h = run.phases.back().history;
    row.final_loss = h.empty() ? 0.0 : h.epochs.back().loss;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string ablation_csv(AblationAxis axis, std::uint64_t seed,
                                const std::vector<AblationRow>& rows) {
  std::string out =
      "axis,value,seed,target_accuracy,target_nn_accuracy,minority_recall,nn_minority_recall,"
      "mmd_source_target,final_loss\n";
  for (const AblationRow& r : rows) {
    out += to_string(axis) + "," + format_double(r.value) + "," + std::to_string(seed) + "," +
           format_double(r.eval.target_accuracy) + "," +
           format_double(r.eval.target_nn_accuracy) + "," + format_double(r.eval.minority_recall) +
           "," + format_double(r.eval.nn_minority_recall) + "," +
           format_double(r.eval.mmd_source_target) + "," + format_double(r.final_loss) +
           "\n";
  }
  return out;
}

// ---- loss comparison under class imbalance ---------------------------------

struct ComparisonRow {
  std::uint64_t seed = 0;
  PairObjective loss = PairObjective::dc;
  EvalReport eval;
};

// Per seed: one base model, then one image-level source->target transfer per
// loss from that same base model, with identical settings.
inline std::vector<ComparisonRow> imbalance_comparison(
    const std::vector<PairObjective>& losses, const SyntheticDomainSpec& spec,
    const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds) {
  std::vector<ComparisonRow> rows;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig run_cfg = c;
    run_cfg.seed = seed;
    run_cfg.dataset.synthetic = spec;
    run_cfg.dataset.files.clear();
    const PairedDomains data = load_dataset(run_cfg);
    AdapterModel base = initial_model(run_cfg, data);
    run_phase(base, data, run_cfg, {Phase::base}, 0);
    for (PairObjective loss : losses) {
      AdapterModel m = base;
      PhaseSpec p{Phase::st_image};
      p.objective = loss;
      rows.push_back({seed, loss, run_phase(m, data, run_cfg, p, 1).eval});
    }
  }
  return rows;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out =
      "seed,loss,target_accuracy,target_nn_accuracy,minority_recall,nn_minority_recall,"
      "mmd_source_target\n";
  for (const ComparisonRow& r : rows) {
    out += std::to_string(r.seed) + "," + to_string(r.loss) + "," +
           format_double(r.eval.target_accuracy) + "," +
           format_double(r.eval.target_nn_accuracy) + "," + format_double(r.eval.minority_recall) +
           "," + format_double(r.eval.nn_minority_recall) + "," +
           format_double(r.eval.mmd_source_target) + "\n";
  }
  return out;
}

}  // namespace dcl
