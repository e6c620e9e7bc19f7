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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// A single criterion can be selected with its number as the only argument.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dcl/cli.hpp"
#include "support/bound_instances.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace dcl;

namespace {

// Gain in target NN accuracy of the full schedule over base, frozen after a
// calibration run over seeds 0-9 (smallest observed gain 0.20).
constexpr double kFrozenNnGainMargin = 0.15;
constexpr int kSeeds = 10;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

FeatureBatch batch_of(std::vector<Vec> a, std::vector<Vec> b) {
  FeatureBatch f;
  f.side_a = std::move(a);
  f.side_b = std::move(b);
  return f;
}

// Full standard schedule, one run per seed; shared by criteria 4 and 5.
const std::vector<RunOutcome>& standard_runs() {
  static const std::vector<RunOutcome> runs = [] {
    std::vector<RunOutcome> out;
    for (int s = 0; s < kSeeds; ++s) out.push_back(run_experiment(standard_config(s)));
    return out;
  }();
  return runs;
}

Outcome criterion1() {
  const double single = dc_loss(batch_of({{1, 2}}, {{-3, 0.5}}), {0.5}).value;
  const double ortho = dc_loss(batch_of({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}}), {1.0}).value;
  const Vec x{0.3, -1.2, 2.0};
  const double same = dc_loss(batch_of({x, x, x}, {x, x, x}), {1.0}).value;
  const bool pass = single == 0.0 && std::abs(ortho - 0.626524) <= 1e-6 &&
                    std::abs(same - 2.0 * std::log(3.0)) <= 1e-9;
  return {pass, "N=1 " + fmt(single) + ", orthonormal " + fmt(ortho, 9) + ", identical " +
                    fmt(same, 12) + " vs " + fmt(2.0 * std::log(3.0), 12)};
}

Outcome criterion2() {
  Rng rng(20260101);
  const double taus[] = {0.1, 0.5, 1.0};
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(16);
    const LossConfig cfg{taus[rng.below(3)]};
    const FeatureBatch b = oracle::random_batch(rng, n, d);
    worst = std::max(worst, oracle::max_gradient_rel_error(
                                b, dc_loss_grad(b, cfg),
                                [&](const FeatureBatch& f) { return dc_loss(f, cfg).value; }));
  }
  return {worst < 1e-5, "max relative error " + fmt(worst, 3) + " over 100 batches"};
}

Outcome criterion3() {
  Rng rng(20260102);
  int bound_fail = 0;
  double identity_worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const oracle::BoundInstance inst = oracle::random_instance(rng, 1 + rng.below(12));
    const RiskReport r = oracle::report(inst);
    if (!r.eq1_holds || r.r_T_fT > r.bound_eq1 + 1e-12) ++bound_fail;
    const Hypothesis h = inst.hypothesis();
    for (const LabeledSet* set : {&inst.source, &inst.target}) {
      double direct = 0.0;
      for (std::size_t i = 0; i < set->size(); ++i) {
        const double p = std::clamp(h(set->features[i]), 1e-7, 1.0 - 1e-7);
        direct -= (set->labels_T[i] - set->labels_S[i]) * std::log(p / (1.0 - p));
      }
      direct /= static_cast<double>(set->size());
      const double via_risks =
          bce_risk(h, *set, Labeler::target) - bce_risk(h, *set, Labeler::source);
      identity_worst = std::max({identity_worst, std::abs(signed_risk_difference(h, *set) - direct),
                            std::abs(via_risks - direct)});
    }
  }
  int relax_fail = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(10);
    const FeatureBatch b = oracle::random_batch(rng, n, 2 + rng.below(6));
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.below(2));
    const UpperBoundTerms u = dc_upper_bound_terms(b, y, rng.uniform(0.1, 2.0));
    if (u.rhs_eq10 < u.lhs_eq10 || u.rhs_eq11 < u.lhs_eq11) ++relax_fail;
  }
  int checked = 0, chain_fail = 0;
  for (int t = 0; t < 1000; ++t) {
    const oracle::BoundInstance inst = t % 2 == 0 ? oracle::premise_instance(rng, 1 + rng.below(12))
                                                  : oracle::random_instance(rng, 1 + rng.below(4));
    const RiskReport r = oracle::report(inst);
    if (!r.chain_checked) continue;
    ++checked;
    if (!(r.eq6_holds && r.eq7_holds && r.eq8_holds)) ++chain_fail;
  }
  const bool pass = bound_fail == 0 && identity_worst <= 1e-9 && relax_fail == 0 &&
                    chain_fail == 0 && checked >= 500;
  return {pass, "target bound failures " + std::to_string(bound_fail) +
                    "/1000, log-odds identity max deviation " + fmt(identity_worst, 3) +
                    ", relaxation failures " + std::to_string(relax_fail) +
                    "/50, chain failures " + std::to_string(chain_fail) + "/" +
                    std::to_string(checked) + " premise instances"};
}

Outcome criterion4() {
  int wins = 0;
  double min_gain = 1.0;
  for (const RunOutcome& run : standard_runs()) {
    const EvalReport& base = run.phases.front().eval;
    const EvalReport& full = run.phases.back().eval;
    const double gain = full.target_nn_accuracy - base.target_nn_accuracy;
    min_gain = std::min(min_gain, gain);
    if (gain >= kFrozenNnGainMargin && full.mmd_source_target < base.mmd_source_target) ++wins;
  }
  return {wins >= 8, std::to_string(wins) + "/10 seeds with NN gain >= " +
                         fmt(kFrozenNnGainMargin) + " and lower MMD (smallest gain " +
                         fmt(min_gain, 4) + ")"};
}

Outcome criterion5() {
  // Phase k of the full run is the final state of the schedule truncated
  // after phase k, so every prefix is read from one run per seed. Checked
  // directly on seed 0.
  ExperimentConfig prefix = standard_config(0);
  prefix.phases.resize(3);
  const bool prefix_matches =
      run_experiment(prefix).phases.back().eval.target_accuracy ==
      standard_runs()[0].phases[2].eval.target_accuracy;

  std::vector<double> medians;
  for (std::size_t k = 1; k < 5; ++k) {
    std::vector<double> acc;
    for (const RunOutcome& run : standard_runs()) acc.push_back(run.phases[k].eval.target_accuracy);
    medians.push_back(median(acc));
  }
  double worst_drop = 0.0;
  for (std::size_t k = 1; k < medians.size(); ++k) {
    worst_drop = std::max(worst_drop, medians[k - 1] - medians[k]);
  }
  int wins = 0;
  for (const RunOutcome& run : standard_runs()) {
    if (run.phases[4].eval.target_accuracy > run.phases[1].eval.target_accuracy) ++wins;
  }
  std::string meds;
  for (double m : medians) meds += (meds.empty() ? "" : " ") + fmt(m, 4);
  return {prefix_matches && worst_drop <= 0.01 && wins >= 7,
          "medians " + meds + ", largest drop " + fmt(worst_drop, 3) + ", full beats st_image in " +
              std::to_string(wins) + "/10" + (prefix_matches ? "" : ", prefix mismatch")};
}

Outcome criterion6() {
  const ExperimentConfig c = imbalance_config(0);
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < kSeeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  const auto rows = imbalance_comparison({PairObjective::dc, PairObjective::triplet},
                                         *c.dataset.synthetic, c, seeds);
  std::map<std::uint64_t, std::map<PairObjective, double>> recall;
  for (const ComparisonRow& r : rows) recall[r.seed][r.loss] = r.eval.nn_minority_recall;
  int wins = 0;
  for (const auto& [seed, by_loss] : recall) {
    if (by_loss.at(PairObjective::dc) >= by_loss.at(PairObjective::triplet)) ++wins;
  }
  return {wins >= 8, "DC minority recall >= triplet in " + std::to_string(wins) + "/10 seeds"};
}

Outcome criterion7() {
  Rng rng(20260107);
  double worst_high = 0.0;
  for (std::size_t n : {2u, 3u, 5u, 8u}) {
    const FeatureBatch b = oracle::random_batch(rng, n, 6);
    worst_high = std::max(worst_high,
                          std::abs(dc_loss(b, {1e6}).value - 2.0 * std::log(static_cast<double>(n))));
  }
  std::vector<Vec> a, b;
  for (std::size_t i = 0; i < 4; ++i) {
    Vec e(6, 0.0);
    e[i] = 1.0;
    Vec f = e;
    for (double& x : f) x += 0.05 * rng.normal();
    a.push_back(e);
    b.push_back(f);
  }
  const double low = dc_loss(batch_of(a, b), {1e-3}).value;

  const fs::path out = fs::temp_directory_path() / "dcl_acceptance_tau";
  fs::remove_all(out);
  const std::string cfg = (fs::path(DCL_SOURCE_DIR) / "configs" / "ablate_tau.json").string();
  const std::string cmd = std::string(DCL_CLI_PATH) + " --config " + cfg + " --out " +
                          out.string() + " ablate --axis tau >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  bool csv_ok = status == 0;
  std::string csv_note = "exit " + std::to_string(status);
  if (csv_ok) {
    std::istringstream in(read_text((out / "ablation.csv").string()));
    std::string line;
    std::getline(in, line);
    csv_ok = line ==
             "axis,value,seed,target_accuracy,target_nn_accuracy,minority_recall,"
             "nn_minority_recall,mmd_source_target,final_loss";
    std::vector<double> values;
    while (csv_ok && std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() != 9 || cells[0] != "tau") {
        csv_ok = false;
        break;
      }
      for (std::size_t k = 3; k < 9; ++k) csv_ok = csv_ok && std::isfinite(std::stod(cells[k]));
      values.push_back(std::stod(cells[1]));
    }
    const std::vector<double> grid = default_ablation_grid(AblationAxis::tau);
    csv_ok = csv_ok && values == grid &&
             std::find(grid.begin(), grid.end(), 0.5) != grid.end();
    csv_note = std::to_string(values.size()) + " rows, " + (csv_ok ? "well-formed" : "malformed");
  }
  fs::remove_all(out);
  return {worst_high <= 1e-3 && low < 1e-3 && csv_ok,
          "tau=1e6 max deviation from 2 ln N " + fmt(worst_high, 3) + ", tau=1e-3 loss " +
              fmt(low, 3) + ", ablation CSV " + csv_note};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text(e.path().string());
  }
  return files;
}

Outcome criterion8() {
  const fs::path out = fs::temp_directory_path() / "dcl_acceptance_repro";
  const std::string cfg = (fs::path(DCL_SOURCE_DIR) / "configs" / "standard.json").string();
  const std::string cmd = std::string(DCL_CLI_PATH) + " --config " + cfg + " --seed 3 --out " +
                          out.string() + " run >/dev/null 2>&1";
  std::vector<std::map<std::string, std::string>> snaps;
  for (int rep = 0; rep < 2; ++rep) {
    fs::remove_all(out);
    if (std::system(cmd.c_str()) != 0) return {false, "run exited nonzero"};
    snaps.push_back(snapshot(out));
  }
  fs::remove_all(out);
  const bool has_outputs = snaps[0].count("checkpoint.json") && snaps[0].count("risk_report.json") &&
                           snaps[0].count("eval.json") && snaps[0].count("manifest.json");
  const bool same = snaps[0] == snaps[1];
  return {has_outputs && same, std::to_string(snaps[0].size()) + " files, " +
                                   (same ? "byte-identical" : "differ") + " across two runs"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> all = {
      {1, "closed-form loss values", 1, criterion1},
      {2, "gradient exactness", 30, criterion2},
      {3, "bound-chain suite", 60, criterion3},
      {4, "adaptation efficacy", 300, criterion4},
      {5, "phase ablation trend", 900, criterion5},
      {6, "imbalance minority recall", 600, criterion6},
      {7, "temperature behavior", 120, criterion7},
      {8, "reproducibility", 600, criterion8},
  };
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (const Criterion& c : all) {
    if (only && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < c.limit_s;
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): "
              << o.detail << " [" << fmt(secs, 3) << " s, limit " << c.limit_s << " s]"
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
