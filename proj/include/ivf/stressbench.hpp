// Copyright 2026 The ivfusion Authors.
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

// Metric-effectiveness stress benchmark: corrupt each sequence's fused clip
// per (family, level), score every registered metric against the fixed
// sources, and summarize each (family, metric) pair with rank-agreement
// statistics. Within a family, metrics are ranked per criterion (ties get
// averaged ranks) and avg_rank averages the six criterion ranks.
//
// Corruption seeds derive from (seed, family, sequence) only, so all levels
// of one sweep share their random draws.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/error.hpp"
#include "ivf/io.hpp"
#include "ivf/metrics.hpp"
#include "ivf/perturb.hpp"
#include "ivf/rng.hpp"
#include "json.hpp"

namespace ivf {

struct ClipTriple {
  std::string name;
  Clip ir, vi, fused;
};

struct MetricInput {
  const Clip& ir;
  const Clip& vi;
  const Clip& fused;
  std::string family;
  int sequence = 0;
  int level = 0;
};

struct MetricDef {
  std::string name;
  MetricDirection direction = MetricDirection::kLowerBetter;
  std::function<double(const MetricInput&)> fn;
};

inline std::vector<MetricDef> default_metrics() {
  std::vector<MetricDef> m;
  m.push_back({"MMCI", MetricDirection::kLowerBetter,
               [](const MetricInput& in) { return mmci(in.ir, in.vi, in.fused).value; }});
  m.push_back({"TCPE", MetricDirection::kLowerBetter,
               [](const MetricInput& in) { return tcpe(in.ir, in.vi, in.fused).value; }});
  return m;
}

// Registry hook for scores computed outside this toolkit: values indexed
// [sequence][level], one table per family.
inline MetricDef make_external_metric(
    const std::string& name, MetricDirection direction,
    std::map<std::string, std::vector<std::vector<double>>> per_family_values) {
  return {name, direction,
          [table = std::move(per_family_values), name](const MetricInput& in) {
            const auto it = table.find(in.family);
            if (it == table.end()) {
              throw ParameterError("external metric " + name +
                                   " has no scores for family " + in.family);
            }
            return it->second.at(static_cast<std::size_t>(in.sequence))
                .at(static_cast<std::size_t>(in.level));
          }};
}

inline constexpr std::array<const char*, 6> kBenchCriteria = {
    "global_spearman", "global_pearson",  "mean_seq_spearman",
    "monotonic_rate",  "pairwise_acc",    "adjacent_sep"};

inline const std::vector<double>& default_bench_levels() {
  static const std::vector<double> levels = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  return levels;
}

inline std::vector<PerturbFamily> default_bench_families() {
  return {PerturbFamily::kModalityDrift, PerturbFamily::kTemporalShuffle,
          PerturbFamily::kMixedHard};
}

struct BenchRow {
  std::string family;
  std::string metric;
  RankStats stats;

  bool operator==(const BenchRow& o) const {
    return family == o.family && metric == o.metric &&
           stats.global_spearman == o.stats.global_spearman &&
           stats.global_pearson == o.stats.global_pearson &&
           stats.mean_seq_spearman == o.stats.mean_seq_spearman &&
           stats.monotonic_rate == o.stats.monotonic_rate &&
           stats.pairwise_acc == o.stats.pairwise_acc &&
           stats.adjacent_sep == o.stats.adjacent_sep &&
           stats.avg_rank == o.stats.avg_rank;
  }
};

struct BenchTable {
  std::vector<std::string> families;
  std::vector<std::string> metrics;
  // rows are family-major: rows[f * metrics.size() + m]
  std::vector<BenchRow> rows;
  // ranks[f][criterion][m]: 1-based rank of metric m, ties averaged
  std::vector<std::array<std::vector<double>, 6>> ranks;

  bool operator==(const BenchTable& o) const {
    return families == o.families && metrics == o.metrics && rows == o.rows &&
           ranks == o.ranks;
  }
};

// ---------------------------------------------------------------------------
// Bench run
// ---------------------------------------------------------------------------

inline BenchTable run_bench(const std::vector<ClipTriple>& corpus,
                            const std::vector<PerturbFamily>& families,
                            const std::vector<double>& levels,
                            const std::vector<MetricDef>& metrics, std::uint64_t seed) {
  if (corpus.empty()) throw ParameterError("stress bench needs a non-empty corpus");
  if (levels.size() < 2) throw ParameterError("stress bench needs at least two levels");
  if (metrics.empty()) throw ParameterError("stress bench needs at least one metric");

  BenchTable table;
  for (const auto& m : metrics) table.metrics.push_back(m.name);

  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    const PerturbFamily family = families[fi];
    table.families.emplace_back(family_name(family));

    // values[m][seq][level]
    std::vector<std::vector<std::vector<double>>> values(
        metrics.size(), std::vector<std::vector<double>>(
                            corpus.size(), std::vector<double>(levels.size(), 0.0)));
    for (std::size_t s = 0; s < corpus.size(); ++s) {
      const std::uint64_t seq_seed =
          mix_seed(mix_seed(seed, static_cast<std::uint64_t>(family) + 1),
                   static_cast<std::uint64_t>(s) + 1);
      for (std::size_t l = 0; l < levels.size(); ++l) {
        const PerturbSpec spec{family, levels[l], seq_seed};
        const Clip corrupted =
            apply_perturbation(corpus[s].fused, spec, &corpus[s].ir, &corpus[s].vi);
        for (std::size_t m = 0; m < metrics.size(); ++m) {
          const MetricInput in{corpus[s].ir, corpus[s].vi,        corrupted,
                               table.families.back(), static_cast<int>(s),
                               static_cast<int>(l)};
          const double v = metrics[m].fn(in);
          if (std::isnan(v)) {
            throw Error("metric " + metrics[m].name + " returned NaN on sequence " +
                        corpus[s].name + " (family " + table.families.back() +
                        ", level " + std::to_string(levels[l]) + ")");
          }
          values[m][s][l] = v;
        }
      }
    }

    std::vector<RankStats> stats(metrics.size());
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      stats[m] = rank_stats(values[m], metrics[m].direction);
    }

    // Rank metrics per criterion: every criterion is higher-is-better, so
    // rank descending (negate and rank ascending with averaged ties).
    std::array<std::vector<double>, 6> fam_ranks;
    const auto criterion_value = [](const RankStats& st, int c) {
      switch (c) {
        case 0: return st.global_spearman;
        case 1: return st.global_pearson;
        case 2: return st.mean_seq_spearman;
        case 3: return st.monotonic_rate;
        case 4: return st.pairwise_acc;
        default: return st.adjacent_sep;
      }
    };
    for (int c = 0; c < 6; ++c) {
      std::vector<double> neg(metrics.size());
      for (std::size_t m = 0; m < metrics.size(); ++m) neg[m] = -criterion_value(stats[m], c);
      fam_ranks[static_cast<std::size_t>(c)] = average_ranks(neg);
    }
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      double avg = 0.0;
      for (int c = 0; c < 6; ++c) avg += fam_ranks[static_cast<std::size_t>(c)][m];
      stats[m].avg_rank = avg / 6.0;
      table.rows.push_back({table.families.back(), metrics[m].name, stats[m]});
    }
    table.ranks.push_back(fam_ranks);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline double round4(double v) { return std::strtod(fmt4(v).c_str(), nullptr); }

inline std::array<double, 7> row_numbers(const RankStats& st) {
  return {st.global_spearman, st.global_pearson, st.mean_seq_spearman,
          st.monotonic_rate,  st.pairwise_acc,   st.adjacent_sep,
          st.avg_rank};
}

}  // namespace detail

enum class TableFormat { kCsv, kJson, kMarkdown };

inline TableFormat table_format_from_string(const std::string& s) {
  if (s == "csv") return TableFormat::kCsv;
  if (s == "json") return TableFormat::kJson;
  if (s == "markdown") return TableFormat::kMarkdown;
  throw ParameterError("unknown table format: " + s);
}

// Column order: mode, metric, the six criteria, avg_rank; 4-decimal values.
inline std::string emit_table(const BenchTable& table, TableFormat format) {
  if (format == TableFormat::kCsv || format == TableFormat::kMarkdown) {
    const bool md = format == TableFormat::kMarkdown;
    std::string out;
    const char* headers[9] = {"mode",           "metric",        "global_spearman",
                              "global_pearson", "mean_seq_spearman", "monotonic_rate",
                              "pairwise_acc",   "adjacent_sep",  "avg_rank"};
    if (md) {
      out += "|";
      for (const char* h : headers) out += std::string(" ") + h + " |";
      out += "\n|";
      for (int i = 0; i < 9; ++i) out += " --- |";
      out += "\n";
    } else {
      for (int i = 0; i < 9; ++i) {
        out += headers[i];
        out += i == 8 ? "\n" : ",";
      }
    }
    for (const auto& row : table.rows) {
      const auto nums = detail::row_numbers(row.stats);
      if (md) {
        out += "| " + row.family + " | " + row.metric + " |";
        for (double v : nums) out += " " + detail::fmt4(v) + " |";
        out += "\n";
      } else {
        out += row.family + "," + row.metric;
        for (double v : nums) out += "," + detail::fmt4(v);
        out += "\n";
      }
    }
    return out;
  }

  nlohmann::json j;
  j["schema"] = 1;
  j["families"] = table.families;
  j["metrics"] = table.metrics;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json r;
    r["mode"] = row.family;
    r["metric"] = row.metric;
    const auto nums = detail::row_numbers(row.stats);
    const char* keys[7] = {"global_spearman", "global_pearson", "mean_seq_spearman",
                           "monotonic_rate",  "pairwise_acc",   "adjacent_sep",
                           "avg_rank"};
    for (int i = 0; i < 7; ++i) r[keys[i]] = detail::round4(nums[i]);
    j["rows"].push_back(r);
  }
  j["ranks"] = nlohmann::json::array();
  for (std::size_t f = 0; f < table.ranks.size(); ++f) {
    nlohmann::json fr;
    fr["family"] = table.families[f];
    for (int c = 0; c < 6; ++c) {
      fr[kBenchCriteria[static_cast<std::size_t>(c)]] =
          table.ranks[f][static_cast<std::size_t>(c)];
    }
    j["ranks"].push_back(fr);
  }
  return j.dump(2) + "\n";
}

inline BenchTable parse_table_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("bench table is not valid JSON: ") + e.what());
  }
  BenchTable table;
  table.families = j.at("families").get<std::vector<std::string>>();
  table.metrics = j.at("metrics").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    BenchRow row;
    row.family = r.at("mode").get<std::string>();
    row.metric = r.at("metric").get<std::string>();
    row.stats.global_spearman = r.at("global_spearman").get<double>();
    row.stats.global_pearson = r.at("global_pearson").get<double>();
    row.stats.mean_seq_spearman = r.at("mean_seq_spearman").get<double>();
    row.stats.monotonic_rate = r.at("monotonic_rate").get<double>();
    row.stats.pairwise_acc = r.at("pairwise_acc").get<double>();
    row.stats.adjacent_sep = r.at("adjacent_sep").get<double>();
    row.stats.avg_rank = r.at("avg_rank").get<double>();
    table.rows.push_back(std::move(row));
  }
  for (const auto& fr : j.at("ranks")) {
    std::array<std::vector<double>, 6> fam_ranks;
    for (int c = 0; c < 6; ++c) {
      fam_ranks[static_cast<std::size_t>(c)] =
          fr.at(kBenchCriteria[static_cast<std::size_t>(c)]).get<std::vector<double>>();
    }
    table.ranks.push_back(std::move(fam_ranks));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Corpus manifest
// ---------------------------------------------------------------------------

// JSON manifest: {"schema":1, "sequences":[{"name":..., "ir":..., "vi":...,
// "fused":...}]}; clip paths resolve relative to the manifest's directory.
inline std::vector<ClipTriple> load_corpus_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest " + path + " is not valid JSON: " + e.what());
  }
  if (!j.contains("sequences") || !j["sequences"].is_array()) {
    throw FormatError("manifest " + path + " lacks a \"sequences\" array");
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  const auto resolve = [&base](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<ClipTriple> corpus;
  for (const auto& seq : j["sequences"]) {
    for (const char* key : {"ir", "vi", "fused"}) {
      if (!seq.contains(key)) {
        throw FormatError("manifest sequence entry lacks \"" + std::string(key) + "\"");
      }
    }
    ClipTriple triple;
    triple.name = seq.value("name", "seq" + std::to_string(corpus.size()));
    triple.ir = load_clip(resolve(seq["ir"].get<std::string>()));
    triple.vi = load_clip(resolve(seq["vi"].get<std::string>()));
    triple.fused = load_clip(resolve(seq["fused"].get<std::string>()));
    corpus.push_back(std::move(triple));
  }
  return corpus;
}

}  // namespace ivf
