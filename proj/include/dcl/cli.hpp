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

// Command-line front end: gen, run, ablate, bounds and eval.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical divergence.

#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcl/adapter.hpp"
#include "dcl/datasets.hpp"
#include "dcl/error.hpp"
#include "dcl/metrics.hpp"
#include "dcl/pipeline.hpp"

namespace dcl {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitDivergence = 3 };

namespace cli {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

inline ExperimentConfig load_config(const GlobalOptions& g) {
  ExperimentConfig c;
  if (g.config_path.empty()) {
    c = standard_config();
  } else {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(g.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(g.config_path + ": " + e.what());
    }
    c = experiment_config_from_json(j);
  }
  if (g.seed) c.seed = *g.seed;
  if (!g.out_dir.empty()) c.output_dir = g.out_dir;
  if (c.output_dir.empty()) throw UsageError("no output directory (use --out or output_dir)");
  return c;
}

inline void write_manifest(const ExperimentConfig& c, const std::string& command,
                           const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json m = manifest(c, command);
  for (const auto& [k, v] : extra.items()) m[k] = v;
  std::filesystem::create_directories(c.output_dir);
  write_json(std::filesystem::path(c.output_dir) / "manifest.json", m);
}

inline AdapterModel load_checkpoint(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

inline std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
    if (used != item.size()) throw UsageError("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

inline nlohmann::json class_histogram(const DomainSet& set, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : set.labels)
    if (y >= 0 && y < num_classes) ++counts[static_cast<std::size_t>(y)];
  nlohmann::json fractions = nlohmann::json::array();
  for (std::size_t n : counts)
    fractions.push_back(set.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(set.size()));
  return {{"count", counts}, {"fraction", fractions}, {"size", set.size()}};
}

inline void cmd_gen(const GlobalOptions& g, std::ostream& out) {
  const ExperimentConfig c = load_config(g);
  if (!c.dataset.synthetic) throw UsageError("gen needs a synthetic dataset");
  const PairedDomains data = load_dataset(c);
  const std::filesystem::path dir(c.output_dir);
  std::filesystem::create_directories(dir);
  save_features(data, (dir / "source.csv").string(), (dir / "target.csv").string());
  const int k = c.dataset.synthetic->num_classes;
  write_json(dir / "summary.json", {{"source", class_histogram(data.source, k)},
                                    {"target", class_histogram(data.target, k)}});
  write_manifest(c, "gen", {{"data_seed", derive_seed(c.seed, 1)}});
  out << "wrote " << (dir / "source.csv").string() << " and " << (dir / "target.csv").string()
      << "\n";
}

inline void cmd_run(const GlobalOptions& g, std::ostream& out) {
  const ExperimentConfig c = load_config(g);
  write_manifest(c, "run");
  const RunOutcome run = run_experiment(c);
  write_run_artifacts(c, run, c.output_dir);
  for (const PhaseResult& p : run.phases) {
    out << to_string(p.phase) << ": target_accuracy=" << format_double(p.eval.target_accuracy)
        << " target_nn_accuracy=" << format_double(p.eval.target_nn_accuracy)
        << " mmd=" << format_double(p.eval.mmd_source_target) << "\n";
  }
}

inline void cmd_ablate(const GlobalOptions& g, const std::string& axis_name,
                       const std::string& values_text, std::ostream& out) {
  const ExperimentConfig c = load_config(g);
  AblationAxis axis{};
  try {
    axis = ablation_axis_from_string(axis_name);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  const std::vector<double> values =
      values_text.empty() ? default_ablation_grid(axis) : parse_values(values_text);
  if (values.size() < 2) throw UsageError("ablate needs at least two values");
  write_manifest(c, "ablate", {{"axis", to_string(axis)}, {"values", values}});
  const auto rows = ablate(c, axis, values, load_dataset(c));
  const std::string csv = ablation_csv(axis, c.seed, rows);
  write_text((std::filesystem::path(c.output_dir) / "ablation.csv").string(), csv);
  out << csv;
}

inline void cmd_bounds(const GlobalOptions& g, const std::string& checkpoint,
                       std::ostream& out) {
  const ExperimentConfig c = load_config(g);
  const AdapterModel model = load_checkpoint(checkpoint);
  write_manifest(c, "bounds", {{"checkpoint", checkpoint}});
  const RiskReport r = build_risk_report(model, load_dataset(c), c);
  const nlohmann::json j = to_json(r);
  write_json(std::filesystem::path(c.output_dir) / "risk_report.json", j);
  out << j.dump(2) << "\n";
}

inline void cmd_eval(const GlobalOptions& g, const std::string& checkpoint,
                     const std::string& compare, int seeds, std::ostream& out) {
  const ExperimentConfig c = load_config(g);
  const std::filesystem::path dir(c.output_dir);
  if (!compare.empty()) {
    if (seeds < 1) throw UsageError("--seeds must be >= 1");
    std::vector<PairObjective> losses;
    std::stringstream ss(compare);
    std::string item;
    try {
      while (std::getline(ss, item, ',')) losses.push_back(pair_objective_from_string(item));
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
    if (!c.dataset.synthetic || !c.dataset.files.empty()) {
      throw UsageError("--compare needs a synthetic dataset");
    }
    std::vector<std::uint64_t> seed_list;
    for (int s = 0; s < seeds; ++s) seed_list.push_back(c.seed + static_cast<std::uint64_t>(s));
    write_manifest(c, "eval", {{"compare", compare}, {"seeds", seed_list}});
    const auto rows = imbalance_comparison(losses, *c.dataset.synthetic, c, seed_list);
    nlohmann::json table = nlohmann::json::array();
    for (const ComparisonRow& r : rows) {
      nlohmann::json e = to_json(r.eval);
      e["seed"] = r.seed;
      e["loss"] = to_string(r.loss);
      table.push_back(e);
    }
    write_json(dir / "comparison.json", table);
    const std::string csv = comparison_csv(rows);
    write_text((dir / "comparison.csv").string(), csv);
    out << csv;
    return;
  }
  if (checkpoint.empty()) throw UsageError("eval needs --checkpoint or --compare");
  const AdapterModel model = load_checkpoint(checkpoint);
  write_manifest(c, "eval", {{"checkpoint", checkpoint}});
  const nlohmann::json j = to_json(evaluate(model, load_dataset(c)));
  write_json(dir / "eval.json", j);
  out << j.dump(2) << "\n";
}

}  // namespace cli

// Parses argv and dispatches; every failure maps to an exit code and one
// line on `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain contrast transfer toolkit", "dcl"};
  app.set_version_flag("--version", kToolkitVersion);
  cli::GlobalOptions g;
  std::string seed_text;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  app.add_option("--seed", seed_text, "Seed overriding the config (u64)");
  app.add_option("--out", g.out_dir, "Output directory overriding the config");
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Write synthetic source/target feature CSVs");
  auto* run = app.add_subcommand("run", "Run the phase schedule");
  auto* abl = app.add_subcommand("ablate", "Sweep tau, lr or batch size");
  std::string axis, values;
  abl->add_option("--axis", axis, "tau, lr or batch")->required();
  abl->add_option("--values", values, "Comma-separated values (default grid if omitted)");
  auto* bounds = app.add_subcommand("bounds", "Risk report for a checkpoint");
  std::string checkpoint;
  bounds->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint or compare losses");
  std::string compare;
  int seeds = 10;
  ev->add_option("--checkpoint", checkpoint, "Checkpoint JSON");
  ev->add_option("--compare", compare, "Comma-separated losses among dc, triplet, mmd");
  ev->add_option("--seeds", seeds, "Number of consecutive seeds for --compare");
  for (CLI::App* sub : {gen, run, abl, bounds, ev}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return kExitOk;
  } catch (const CLI::Success&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << "\n";
      return kExitOk;
    }
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (!seed_text.empty()) {
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        if (seed_text.front() == '-') throw std::invalid_argument("negative");
        v = std::stoull(seed_text, &used);
      } catch (const std::exception&) {
        throw UsageError("--seed must be an unsigned 64-bit integer");
      }
      if (used != seed_text.size()) throw UsageError("--seed must be an unsigned 64-bit integer");
      g.seed = static_cast<std::uint64_t>(v);
    }
    if (*gen) cli::cmd_gen(g, out);
    if (*run) cli::cmd_run(g, out);
    if (*abl) cli::cmd_ablate(g, axis, values, out);
    if (*bounds) cli::cmd_bounds(g, checkpoint, out);
    if (*ev) cli::cmd_eval(g, checkpoint, compare, seeds, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "invalid setting: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "numerical divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace dcl
