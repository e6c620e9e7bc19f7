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

// Paired-domain data: a synthetic Gaussian-mixture generator with a known
// shift map standing in for an image translator, region groups, the feature
// CSV format and paired batching.

#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dcl/error.hpp"
#include "dcl/linalg.hpp"
#include "dcl/losses.hpp"
#include "dcl/random.hpp"

namespace dcl {

using Pairing = std::vector<std::pair<std::size_t, std::size_t>>;

// x -> scale * R x + translation, where R is a product of Givens rotations,
// angle k acting on the coordinate plane (2k, 2k + 1).
struct ShiftMap {
  std::vector<double> rotation_angles;
  Vec translation;  // empty means zero
  double scale = 1.0;

  Vec rotate(VecView x) const {
    Vec y(x.begin(), x.end());
    for (std::size_t k = 0; k < rotation_angles.size(); ++k) {
      const std::size_t p = 2 * k, q = 2 * k + 1;
      if (q >= y.size()) break;
      const double c = std::cos(rotation_angles[k]);
      const double s = std::sin(rotation_angles[k]);
      const double yp = c * y[p] - s * y[q];
      const double yq = s * y[p] + c * y[q];
      y[p] = yp;
      y[q] = yq;
    }
    return y;
  }

  Vec rotate_inverse(VecView x) const {
    Vec y(x.begin(), x.end());
    for (std::size_t k = rotation_angles.size(); k-- > 0;) {
      const std::size_t p = 2 * k, q = 2 * k + 1;
      if (q >= y.size()) continue;
      const double c = std::cos(rotation_angles[k]);
      const double s = std::sin(rotation_angles[k]);
      const double yp = c * y[p] + s * y[q];
      const double yq = -s * y[p] + c * y[q];
      y[p] = yp;
      y[q] = yq;
    }
    return y;
  }

  Vec apply(VecView x) const {
    Vec y = rotate(x);
    for (std::size_t k = 0; k < y.size(); ++k) {
      y[k] *= scale;
      if (!translation.empty()) y[k] += translation[k];
    }
    return y;
  }

  Vec inverse(VecView y) const {
    Vec x(y.begin(), y.end());
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!translation.empty()) x[k] -= translation[k];
      x[k] /= scale;
    }
    return rotate_inverse(x);
  }

  bool is_identity() const {
    for (double a : rotation_angles)
      if (a != 0.0) return false;
    for (double t : translation)
      if (t != 0.0) return false;
    return scale == 1.0;
  }
};

struct SyntheticDomainSpec {
  int num_classes = 3;
  int dim = 8;
  double radius = 3.0;
  std::vector<Vec> class_means;  // empty: radius * e_k (random directions if K > dim)
  double noise_sigma = 1.0;
  ShiftMap shift;
  Vec class_mixture;  // empty: uniform
  int samples_per_domain = 2000;
  int target_samples = -1;  // -1: same as samples_per_domain
  int max_regions = 3;
  double region_sigma = 1.0;
};

inline std::vector<Vec> resolved_means(const SyntheticDomainSpec& spec,
                                       std::uint64_t seed) {
  if (!spec.class_means.empty()) return spec.class_means;
  const auto k = static_cast<std::size_t>(spec.num_classes);
  const auto d = static_cast<std::size_t>(spec.dim);
  std::vector<Vec> means(k, Vec(d, 0.0));
  if (k <= d) {
    for (std::size_t c = 0; c < k; ++c) means[c][c] = spec.radius;
    return means;
  }
  Rng rng(derive_seed(seed, 17));
  for (Vec& m : means) {
    double n = 0.0;
    while (n == 0.0) {
      for (double& v : m) v = rng.normal();
      n = norm(m);
    }
    for (double& v : m) v *= spec.radius / n;
  }
  return means;
}

inline Vec resolved_mixture(const SyntheticDomainSpec& spec) {
  if (!spec.class_mixture.empty()) return spec.class_mixture;
  return Vec(static_cast<std::size_t>(spec.num_classes),
             1.0 / static_cast<double>(spec.num_classes));
}

inline void validate(const SyntheticDomainSpec& spec) {
  if (spec.num_classes < 2) throw DataError("synthetic dataset: num_classes must be >= 2");
  if (spec.dim < 2) throw DataError("synthetic dataset: dim must be >= 2");
  if (spec.samples_per_domain < 0) throw DataError("synthetic dataset: negative sample count");
  if (!(spec.noise_sigma >= 0.0)) throw DataError("synthetic dataset: noise_sigma must be >= 0");
  if (!(spec.shift.scale > 0.0)) throw DataError("synthetic dataset: shift scale must be > 0");
  if (!spec.shift.translation.empty() &&
      spec.shift.translation.size() != static_cast<std::size_t>(spec.dim)) {
    throw DataError("synthetic dataset: translation has the wrong dimension");
  }
  if (spec.shift.rotation_angles.size() > static_cast<std::size_t>(spec.dim / 2)) {
    throw DataError("synthetic dataset: more rotation angles than coordinate planes");
  }
  if (!spec.class_means.empty()) {
    if (spec.class_means.size() != static_cast<std::size_t>(spec.num_classes)) {
      throw DataError("synthetic dataset: class_means count differs from num_classes");
    }
    for (const Vec& m : spec.class_means)
      if (m.size() != static_cast<std::size_t>(spec.dim)) {
        throw DataError("synthetic dataset: class mean has the wrong dimension");
      }
  }
  if (!spec.class_mixture.empty()) {
    if (spec.class_mixture.size() != static_cast<std::size_t>(spec.num_classes)) {
      throw DataError("synthetic dataset: class_mixture length differs from num_classes");
    }
    double total = 0.0;
    for (double w : spec.class_mixture) {
      if (!(w >= 0.0)) throw DataError("synthetic dataset: negative mixture weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DataError("synthetic dataset: mixture must sum to 1");
  }
  if (spec.max_regions < 1) throw DataError("synthetic dataset: max_regions must be >= 1");
  if (spec.noise_sigma == 0.0) {
    const std::vector<Vec> means = resolved_means(spec, 0);
    for (std::size_t a = 0; a < means.size(); ++a)
      for (std::size_t b = a + 1; b < means.size(); ++b)
        if (means[a] == means[b]) {
          throw DataError("synthetic dataset: zero noise with duplicate class means");
        }
  }
}

// Per-image region vectors (object features) with their class labels.
struct RegionGroup {
  std::string image_id;
  std::vector<Vec> region_features;
  std::vector<int> labels;
};

// Samples of one population. Labels are class ids, -1 when unknown.
struct DomainSet {
  std::vector<std::string> ids;
  std::vector<Vec> features;
  std::vector<int> labels;
  std::vector<RegionGroup> regions;  // empty, or one group per sample

  std::size_t size() const { return features.size(); }
  bool empty() const { return features.empty(); }

  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
};

// Originals of both domains and the translated counterparts.
// source_to_target[k] translates source[s_to_t_of[k]] into the target style;
// target_to_source[k] translates target[t_to_s_of[k]] into the source style.
struct PairedDomains {
  DomainSet source;
  DomainSet target;
  DomainSet source_to_target;
  std::vector<std::size_t> s_to_t_of;
  DomainSet target_to_source;
  std::vector<std::size_t> t_to_s_of;

  // (index into source_to_target, index into source)
  Pairing s_to_t_pairs() const {
    Pairing p;
    for (std::size_t k = 0; k < s_to_t_of.size(); ++k) p.emplace_back(k, s_to_t_of[k]);
    return p;
  }
  // (index into target, index into target_to_source)
  Pairing t_to_s_pairs() const {
    Pairing p;
    for (std::size_t k = 0; k < t_to_s_of.size(); ++k) p.emplace_back(t_to_s_of[k], k);
    return p;
  }
};

namespace detail {

struct LatentDraw {
  int label;
  Vec x;
  std::vector<Vec> regions;
};

inline LatentDraw draw(const SyntheticDomainSpec& spec, const std::vector<Vec>& means,
                       const Vec& mixture, Rng& rng) {
  LatentDraw out;
  out.label = static_cast<int>(rng.categorical(mixture));
  const Vec& mu = means[static_cast<std::size_t>(out.label)];
  out.x.resize(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) out.x[k] = rng.normal(mu[k], spec.noise_sigma);
  const auto m = 1 + rng.below(static_cast<std::uint64_t>(spec.max_regions));
  for (std::uint64_t r = 0; r < m; ++r) {
    Vec reg(mu.size());
    for (std::size_t k = 0; k < mu.size(); ++k) reg[k] = rng.normal(mu[k], spec.region_sigma);
    out.regions.push_back(std::move(reg));
  }
  return out;
}

inline void push(DomainSet& set, std::string id, Vec x, int label,
                 std::vector<Vec> regions) {
  RegionGroup g{id, std::move(regions), {}};
  g.labels.assign(g.region_features.size(), label);
  set.ids.push_back(std::move(id));
  set.features.push_back(std::move(x));
  set.labels.push_back(label);
  set.regions.push_back(std::move(g));
}

}  // namespace detail

// Draws the source domain and, from the same latent draws, its exact
// shift-image counterparts. The target domain is a separate set of draws
// (unpaired with the source) pushed through the shift; its counterparts in
// the source style come from the inverse shift.
inline PairedDomains generate(const SyntheticDomainSpec& spec, std::uint64_t seed) {
  validate(spec);
  const std::vector<Vec> means = resolved_means(spec, seed);
  const Vec mixture = resolved_mixture(spec);
  Rng rng(seed);
  PairedDomains out;
  for (int i = 0; i < spec.samples_per_domain; ++i) {
    detail::LatentDraw d = detail::draw(spec, means, mixture, rng);
    std::vector<Vec> shifted;
    for (const Vec& r : d.regions) shifted.push_back(spec.shift.apply(r));
    const std::string id = "s" + std::to_string(i);
    detail::push(out.source_to_target, "st" + std::to_string(i), spec.shift.apply(d.x),
                 d.label, std::move(shifted));
    out.s_to_t_of.push_back(static_cast<std::size_t>(i));
    detail::push(out.source, id, std::move(d.x), d.label, std::move(d.regions));
  }
  const int n_target =
      spec.target_samples < 0 ? spec.samples_per_domain : spec.target_samples;
  for (int i = 0; i < n_target; ++i) {
    detail::LatentDraw d = detail::draw(spec, means, mixture, rng);
    std::vector<Vec> shifted, back;
    for (const Vec& r : d.regions) shifted.push_back(spec.shift.apply(r));
    const Vec xt = spec.shift.apply(d.x);
    for (const Vec& r : shifted) back.push_back(spec.shift.inverse(r));
    detail::push(out.target_to_source, "ts" + std::to_string(i), spec.shift.inverse(xt),
                 d.label, std::move(back));
    out.t_to_s_of.push_back(static_cast<std::size_t>(i));
    detail::push(out.target, "t" + std::to_string(i), xt, d.label, std::move(shifted));
  }
  return out;
}

// ---- regions ---------------------------------------------------------------

// At most two distinct region indices drawn uniformly (ascending order); a
// single region is used twice.
inline std::vector<std::size_t> select_regions(std::size_t count, Rng& rng) {
  if (count == 0) throw DataError("region group without regions");
  if (count == 1) return {0, 0};
  if (count == 2) return {0, 1};
  std::size_t first = static_cast<std::size_t>(rng.below(count));
  std::size_t second = static_cast<std::size_t>(rng.below(count - 1));
  if (second >= first) ++second;
  if (second < first) std::swap(first, second);
  return {first, second};
}

struct RegionVectors {
  std::vector<Vec> vectors;  // dimension 2 * region dimension
  std::vector<std::vector<int>> labels;
};

// Concatenates the selected regions of every group in region-index order.
// Groups of equal sizes and the same seed get the same selection, which is
// what keeps translated pairs aligned.
inline RegionVectors make_region_vectors(const std::vector<RegionGroup>& groups,
                                         std::uint64_t seed) {
  Rng rng(seed);
  RegionVectors out;
  for (const RegionGroup& g : groups) {
    if (g.region_features.empty()) {
      throw DataError("make_region_vectors: group '" + g.image_id + "' is empty");
    }
    const std::vector<std::size_t> pick = select_regions(g.region_features.size(), rng);
    out.vectors.push_back(concat(g.region_features[pick[0]], g.region_features[pick[1]]));
    std::vector<int> labels;
    for (std::size_t p : pick)
      labels.push_back(p < g.labels.size() ? g.labels[p] : -1);
    out.labels.push_back(std::move(labels));
  }
  return out;
}

// ---- batching --------------------------------------------------------------

// Shuffled partition of [0, count) into full batches; the remainder is
// dropped.
inline std::vector<std::vector<std::size_t>> batch_indices(std::size_t count,
                                                           std::size_t batch_size,
                                                           Rng& rng) {
  if (batch_size == 0) throw DomainError("batch_size must be positive");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start + batch_size <= count; start += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
  return out;
}

// Paired batches of exactly batch_size pairs: side_a from set_a, side_b from
// set_b. Labels come from set_b when it has them.
inline std::vector<FeatureBatch> make_batches(const DomainSet& set_a,
                                              const DomainSet& set_b,
                                              const Pairing& pairing,
                                              std::size_t batch_size,
                                              std::uint64_t seed) {
  if (batch_size == 0) throw DomainError("make_batches: batch_size must be positive");
  if (batch_size > pairing.size()) {
    throw DomainError("make_batches: batch_size " + std::to_string(batch_size) +
                      " exceeds the " + std::to_string(pairing.size()) +
                      " available pairs");
  }
  for (const auto& [a, b] : pairing) {
    if (a >= set_a.size() || b >= set_b.size()) {
      throw ShapeError("make_batches: pairing refers past the sample sets");
    }
  }
  Rng rng(seed);
  std::vector<FeatureBatch> out;
  for (const auto& idx : batch_indices(pairing.size(), batch_size, rng)) {
    FeatureBatch fb;
    for (std::size_t p : idx) {
      const auto& [a, b] = pairing[p];
      fb.side_a.push_back(set_a.features[a]);
      fb.side_b.push_back(set_b.features[b]);
      fb.labels.push_back(b < set_b.labels.size() ? set_b.labels[b] : -1);
    }
    out.push_back(std::move(fb));
  }
  return out;
}

// ---- feature CSV ------------------------------------------------------------
//
// Header: id,domain,class,translated_of,f0,...,f{d-1}
// domain is "source" or "target"; class is an integer or empty; translated_of
// names the original this row translates (which lives in the other domain)
// or is empty. UTF-8, LF line endings.

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_header(std::size_t dim) {
  std::string h = "id,domain,class,translated_of";
  for (std::size_t k = 0; k < dim; ++k) h += ",f" + std::to_string(k);
  return h;
}

namespace detail {

inline void append_row(std::string& out, const std::string& id, const char* domain,
                       int label, const std::string& translated_of, const Vec& x) {
  out += id;
  out += ',';
  out += domain;
  out += ',';
  if (label >= 0) out += std::to_string(label);
  out += ',';
  out += translated_of;
  for (double v : x) {
    out += ',';
    out += format_double(v);
  }
  out += '\n';
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

// Rows for one side: originals of `domain` followed by the translations into
// `domain`.
inline std::string domain_csv(const PairedDomains& data, bool source_side) {
  const DomainSet& originals = source_side ? data.source : data.target;
  const DomainSet& translated = source_side ? data.target_to_source : data.source_to_target;
  const std::vector<std::size_t>& of = source_side ? data.t_to_s_of : data.s_to_t_of;
  const DomainSet& other = source_side ? data.target : data.source;
  const char* domain = source_side ? "source" : "target";
  const std::size_t dim = originals.empty() ? translated.dim() : originals.dim();
  std::string out = csv_header(dim) + "\n";
  for (std::size_t i = 0; i < originals.size(); ++i)
    detail::append_row(out, originals.ids[i], domain, originals.labels[i], "",
                       originals.features[i]);
  for (std::size_t k = 0; k < translated.size(); ++k)
    detail::append_row(out, translated.ids[k], domain, translated.labels[k],
                       other.ids[of[k]], translated.features[k]);
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw DataError("write to '" + path + "' failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline void save_features(const PairedDomains& data, const std::string& source_path,
                          const std::string& target_path) {
  write_text(source_path, domain_csv(data, true));
  write_text(target_path, domain_csv(data, false));
}

namespace detail {

struct CsvRow {
  std::string id;
  bool source = true;
  int label = -1;
  std::string translated_of;
  Vec x;
  std::size_t line = 0;
  std::string file;
};

inline std::vector<CsvRow> parse_csv(const std::string& text, const std::string& name,
                                     std::size_t& dim, bool& dim_known) {
  std::vector<CsvRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError(name + ":" + std::to_string(line_no) + ": " + msg);
  };
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!header_seen) {
      header_seen = true;
      const auto cols = split(line, ',');
      if (cols.size() < 5) throw fail("header needs at least one feature column");
      const std::size_t d = cols.size() - 4;
      if (line != csv_header(d)) throw fail("unexpected header '" + std::string(line) + "'");
      if (dim_known && d != dim) throw fail("feature dimension differs from earlier files");
      dim = d;
      dim_known = true;
      continue;
    }
    if (line.empty() && pos >= text.size()) break;
    const auto cols = split(line, ',');
    if (cols.size() != dim + 4) {
      throw fail("expected " + std::to_string(dim + 4) + " fields, found " +
                 std::to_string(cols.size()));
    }
    CsvRow row;
    row.line = line_no;
    row.file = name;
    row.id = std::string(cols[0]);
    if (row.id.empty()) throw fail("empty id");
    if (cols[1] == "source") {
      row.source = true;
    } else if (cols[1] == "target") {
      row.source = false;
    } else {
      throw fail("domain must be 'source' or 'target'");
    }
    if (!cols[2].empty()) {
      const auto r = std::from_chars(cols[2].data(), cols[2].data() + cols[2].size(), row.label);
      if (r.ec != std::errc() || r.ptr != cols[2].data() + cols[2].size() || row.label < 0) {
        throw fail("class must be a nonnegative integer");
      }
    }
    row.translated_of = std::string(cols[3]);
    row.x.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const std::string_view f = cols[4 + k];
      const auto r = std::from_chars(f.data(), f.data() + f.size(), row.x[k]);
      if (f.empty() || r.ec != std::errc() || r.ptr != f.data() + f.size() ||
          !std::isfinite(row.x[k])) {
        throw fail("feature f" + std::to_string(k) + " is not a finite decimal number");
      }
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw DataError(name + ": missing header");
  return rows;
}

}  // namespace detail

// Parses one or more feature CSV files into originals and translations.
inline PairedDomains load_features(const std::vector<std::string>& paths) {
  std::vector<detail::CsvRow> rows;
  std::size_t dim = 0;
  bool dim_known = false;
  for (const std::string& p : paths) {
    auto r = detail::parse_csv(read_text(p), p, dim, dim_known);
    rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                std::make_move_iterator(r.end()));
  }
  PairedDomains out;
  // id -> (is source, index among originals)
  std::map<std::string, std::pair<bool, std::size_t>> originals;
  std::map<std::string, std::size_t> seen;
  for (const auto& row : rows) {
    if (!seen.emplace(row.id, row.line).second) {
      throw DataError(row.file + ":" + std::to_string(row.line) + ": duplicate id '" +
                      row.id + "'");
    }
    if (!row.translated_of.empty()) continue;
    DomainSet& set = row.source ? out.source : out.target;
    originals[row.id] = {row.source, set.size()};
    set.ids.push_back(row.id);
    set.features.push_back(row.x);
    set.labels.push_back(row.label);
    set.regions.push_back({row.id, {row.x}, {row.label}});
  }
  for (const auto& row : rows) {
    if (row.translated_of.empty()) continue;
    const auto it = originals.find(row.translated_of);
    const std::string where = row.file + ":" + std::to_string(row.line) + ": ";
    if (it == originals.end()) {
      throw DataError(where + "translated_of refers to unknown original '" +
                      row.translated_of + "'");
    }
    if (it->second.first == row.source) {
      throw DataError(where + "a translation must live in the other domain than '" +
                      row.translated_of + "'");
    }
    DomainSet& set = row.source ? out.target_to_source : out.source_to_target;
    (row.source ? out.t_to_s_of : out.s_to_t_of).push_back(it->second.second);
    set.ids.push_back(row.id);
    set.features.push_back(row.x);
    set.labels.push_back(row.label);
    set.regions.push_back({row.id, {row.x}, {row.label}});
  }
  return out;
}

inline PairedDomains load_features(const std::string& path) {
  return load_features(std::vector<std::string>{path});
}

// ---- dataset JSON ----------------------------------------------------------

inline nlohmann::json to_json(const SyntheticDomainSpec& s) {
  nlohmann::json j = {{"num_classes", s.num_classes},
                      {"dim", s.dim},
                      {"radius", s.radius},
                      {"noise_sigma", s.noise_sigma},
                      {"shift",
                       {{"rotation_angles", s.shift.rotation_angles},
                        {"translation", s.shift.translation},
                        {"scale", s.shift.scale}}},
                      {"class_mixture", s.class_mixture},
                      {"samples_per_domain", s.samples_per_domain},
                      {"target_samples", s.target_samples},
                      {"max_regions", s.max_regions},
                      {"region_sigma", s.region_sigma}};
  if (!s.class_means.empty()) j["class_means"] = s.class_means;
  return j;
}

inline SyntheticDomainSpec synthetic_spec_from_json(const nlohmann::json& j,
                                                    SyntheticDomainSpec s = {}) {
  try {
    s.num_classes = j.value("num_classes", s.num_classes);
    s.dim = j.value("dim", s.dim);
    s.radius = j.value("radius", s.radius);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    if (j.contains("class_means")) s.class_means = j.at("class_means").get<std::vector<Vec>>();
    if (j.contains("shift")) {
      const auto& sh = j.at("shift");
      s.shift.rotation_angles = sh.value("rotation_angles", s.shift.rotation_angles);
      s.shift.translation = sh.value("translation", s.shift.translation);
      s.shift.scale = sh.value("scale", s.shift.scale);
    }
    s.class_mixture = j.value("class_mixture", s.class_mixture);
    s.samples_per_domain = j.value("samples_per_domain", s.samples_per_domain);
    s.target_samples = j.value("target_samples", s.target_samples);
    s.max_regions = j.value("max_regions", s.max_regions);
    s.region_sigma = j.value("region_sigma", s.region_sigma);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synthetic spec: ") + e.what());
  }
  validate(s);
  return s;
}

}  // namespace dcl
