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

// Command-line front end. One binary, subcommand per analysis:
//
//   decompose      split a clip into low/high frequency components
//   dfam-forward   run the full fusion block on an ir/vi feature pair
//   tcloss         temporal-consistency loss breakdown for a fused clip
//   metrics        MMCI and TCPE scores for a fused clip
//   perturb        apply a corruption family at a given strength
//   stressbench    metric ranking table over a corrupted corpus
//   freq-analysis  temporal energy sweep across corruption strengths
//   synth          generate seeded synthetic clips and corpora
//
// Exit codes: 0 success, 2 usage errors (bad flags, unknown config keys),
// 1 data or numeric errors. All output is deterministic for a fixed seed.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ivf/dfam.hpp"
#include "ivf/freq.hpp"
#include "ivf/io.hpp"
#include "ivf/lowfreq.hpp"
#include "ivf/metrics.hpp"
#include "ivf/perturb.hpp"
#include "ivf/scam.hpp"
#include "ivf/stressbench.hpp"
#include "ivf/synth.hpp"
#include "ivf/tcloss.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config overrides
// ---------------------------------------------------------------------------

// Dotted-key overrides (e.g. tc.softmax_temp=0.2) collected from --config and
// --set, applied to the module configs a subcommand actually owns. Unknown
// keys are an error, never silently dropped.
class KeyBinder {
 public:
  void number(const std::string& key, double* dst) {
    setters_[key] = [key, dst](const std::string& text) {
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (end == text.c_str() || *end != '\0') {
        throw ivf::ParameterError("config key " + key + " expects a number, got '" +
                                  text + "'");
      }
      *dst = v;
    };
  }

  void number(const std::string& key, float* dst) {
    setters_[key] = [key, dst](const std::string& text) {
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (end == text.c_str() || *end != '\0') {
        throw ivf::ParameterError("config key " + key + " expects a number, got '" +
                                  text + "'");
      }
      *dst = static_cast<float>(v);
    };
  }

  void integer(const std::string& key, int* dst) {
    setters_[key] = [key, dst](const std::string& text) {
      char* end = nullptr;
      const long v = std::strtol(text.c_str(), &end, 10);
      if (end == text.c_str() || *end != '\0') {
        throw ivf::ParameterError("config key " + key + " expects an integer, got '" +
                                  text + "'");
      }
      *dst = static_cast<int>(v);
    };
  }

  void boolean(const std::string& key, bool* dst) {
    setters_[key] = [key, dst](const std::string& text) {
      if (text == "true" || text == "1") {
        *dst = true;
      } else if (text == "false" || text == "0") {
        *dst = false;
      } else {
        throw ivf::ParameterError("config key " + key + " expects true/false, got '" +
                                  text + "'");
      }
    };
  }

  void apply(const std::vector<std::pair<std::string, std::string>>& kvs) const {
    for (const auto& [key, value] : kvs) {
      const auto it = setters_.find(key);
      if (it == setters_.end()) {
        throw ivf::ParameterError("unknown config key: " + key);
      }
      it->second(value);
    }
  }

 private:
  std::map<std::string, std::function<void(const std::string&)>> setters_;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string config_path;
  std::vector<std::string> sets;

  // Flattened key=value pairs: config file entries first, --set after, so
  // command-line overrides win.
  std::vector<std::pair<std::string, std::string>> overrides() const {
    std::vector<std::pair<std::string, std::string>> kvs;
    if (!config_path.empty()) {
      json j;
      try {
        j = json::parse(ivf::read_text_file(config_path));
      } catch (const json::parse_error& e) {
        throw ivf::FormatError("config " + config_path + " is not valid JSON: " +
                               e.what());
      }
      if (!j.is_object()) {
        throw ivf::FormatError("config " + config_path +
                               " must be a flat JSON object of key=value pairs");
      }
      for (const auto& [key, value] : j.items()) {
        kvs.emplace_back(key, value.is_string() ? value.get<std::string>()
                                                : value.dump());
      }
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ivf::ParameterError("--set expects key=value, got '" + s + "'");
      }
      kvs.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return kvs;
  }
};

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

double r9(double v) { return ivf::round_sig9(v); }

void emit_text(const std::string& out_path, const std::string& body) {
  if (out_path.empty()) {
    std::fputs(body.c_str(), stdout);
  } else {
    ivf::write_text_file(out_path, body);
  }
}

json clip_summary(const ivf::Clip& clip) {
  double mn = clip.raw().empty() ? 0.0 : clip.raw()[0];
  double mx = mn;
  double mean = 0.0;
  for (float v : clip.raw()) {
    mn = std::min(mn, static_cast<double>(v));
    mx = std::max(mx, static_cast<double>(v));
    mean += v;
  }
  if (!clip.raw().empty()) mean /= static_cast<double>(clip.raw().size());
  json s;
  s["t"] = clip.t();
  s["c"] = clip.c();
  s["h"] = clip.h();
  s["w"] = clip.w();
  s["min"] = r9(mn);
  s["max"] = r9(mx);
  s["mean"] = r9(mean);
  return s;
}

std::vector<double> parse_number_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end == item.c_str() || *end != '\0') {
      throw ivf::ParameterError(std::string(flag) + " expects comma-separated numbers, got '" +
                                text + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_decompose(const RunConfig& run, const std::string& in,
                  const std::string& out, const std::string& logits) {
  ivf::DecompWeights weights;
  if (!logits.empty()) {
    const auto vals = parse_number_list(logits, "--logits");
    if (vals.size() != 3) {
      throw ivf::ParameterError("--logits expects exactly 3 values, got " +
                                std::to_string(vals.size()));
    }
    weights.logits = {vals[0], vals[1], vals[2]};
  }
  KeyBinder binder;
  binder.number("freq.logit0", &weights.logits[0]);
  binder.number("freq.logit1", &weights.logits[1]);
  binder.number("freq.logit2", &weights.logits[2]);
  binder.apply(run.overrides());

  const ivf::Clip clip = ivf::load_clip(in);
  const ivf::FreqPair pair = ivf::decompose(clip, weights);
  const std::filesystem::path base(out);
  ivf::save_clip_raw((base / "low").string(), pair.low);
  ivf::save_clip_raw((base / "high").string(), pair.high);

  json report;
  report["schema"] = 1;
  const auto alpha = weights.weights();
  report["weights"] = {r9(alpha[0]), r9(alpha[1]), r9(alpha[2])};
  report["low"] = clip_summary(pair.low);
  report["high"] = clip_summary(pair.high);
  ivf::write_text_file((base / "report.json").string(), report.dump(2) + "\n");
  return 0;
}

// TcGrid dumps reuse the clip container with H=W=1.
ivf::Clip grid_as_clip(const ivf::TcGrid& g) {
  ivf::Clip clip(g.t, g.c, 1, 1);
  for (int t = 0; t < g.t; ++t) {
    for (int c = 0; c < g.c; ++c) clip.at(t, c, 0, 0) = g.at(t, c);
  }
  return clip;
}

int cmd_dfam_forward(const RunConfig& run, const std::string& ir_path,
                     const std::string& vi_path, const std::string& out, int stage,
                     double lambda_flag, bool dump_selection, bool dump_lf) {
  ivf::ScamConfig cfg = stage >= 0 ? ivf::ScamConfig::stage(stage) : ivf::ScamConfig{};
  ivf::DecompWeights weights;
  ivf::LfpmParams lfpm_defaults = ivf::LfpmParams::zeros(1);  // scalar knobs only
  float lambda_hf = static_cast<float>(lambda_flag);

  KeyBinder binder;
  binder.integer("scam.block_size", &cfg.block_size);
  binder.number("scam.sparse_ratio", &cfg.sparse_ratio);
  binder.integer("scam.heads", &cfg.heads);
  binder.number("scam.expansion", &cfg.expansion);
  binder.number("freq.logit0", &weights.logits[0]);
  binder.number("freq.logit1", &weights.logits[1]);
  binder.number("freq.logit2", &weights.logits[2]);
  binder.number("lfpm.beta", &lfpm_defaults.beta);
  binder.integer("lfpm.groups", &lfpm_defaults.groups);
  binder.integer("lfpm.max_shift", &lfpm_defaults.max_shift);
  binder.number("lfpm.perturb_prob", &lfpm_defaults.perturb_prob);
  binder.boolean("lfpm.training_mode", &lfpm_defaults.training_mode);
  binder.number("dfam.lambda_hf", &lambda_hf);
  binder.apply(run.overrides());

  const ivf::Clip f_ir = ivf::load_clip(ir_path);
  const ivf::Clip f_vi = ivf::load_clip(vi_path);
  ivf::require_same_shape(f_ir, f_vi, "dfam-forward --ir vs --vi");

  ivf::DfamParams params = ivf::DfamParams::seeded(f_ir.c(), cfg, run.seed);
  params.decomp = weights;
  params.lambda_hf = lambda_hf;
  for (ivf::LfpmParams* p : {&params.lfpm_ir, &params.lfpm_vi}) {
    p->beta = lfpm_defaults.beta;
    p->groups = lfpm_defaults.groups;
    p->max_shift = lfpm_defaults.max_shift;
    p->perturb_prob = lfpm_defaults.perturb_prob;
    p->training_mode = lfpm_defaults.training_mode;
  }

  ivf::DfamTrace trace;
  const bool want_trace = dump_selection || dump_lf;
  const ivf::Clip fused =
      ivf::dfam_forward(f_ir, f_vi, params, run.seed, want_trace ? &trace : nullptr);
  const std::filesystem::path base(out);
  ivf::save_clip_raw((base / "fused").string(), fused);

  json report;
  report["schema"] = 1;
  report["seed"] = run.seed;
  report["fused"] = clip_summary(fused);
  ivf::write_text_file((base / "report.json").string(), report.dump(2) + "\n");

  if (dump_selection) {
    json sel;
    sel["schema"] = 1;
    sel["k"] = trace.scam.selection.k;
    sel["blocks_x"] = trace.scam.selection.blocks_x;
    sel["blocks_y"] = trace.scam.selection.blocks_y;
    sel["selected"] = trace.scam.selection.selected;
    ivf::write_text_file((base / "selection.json").string(), sel.dump(2) + "\n");
  }
  if (dump_lf) {
    const std::filesystem::path lf = base / "lf";
    for (const auto& [tag, t] :
         {std::pair<const char*, const ivf::LfpmTrace*>{"ir", &trace.lfpm_ir},
          {"vi", &trace.lfpm_vi}}) {
      ivf::save_clip_raw((lf / (std::string("delta_") + tag)).string(),
                         grid_as_clip(t->delta));
      ivf::save_clip_raw((lf / (std::string("gate_") + tag)).string(),
                         grid_as_clip(t->gate));
      ivf::save_clip_raw((lf / (std::string("lp_") + tag)).string(), t->lp);
      ivf::save_clip_raw((lf / (std::string("lhat_") + tag)).string(), t->lhat);
    }
    ivf::save_clip_raw((lf / "zs").string(), grid_as_clip(trace.ltcm.zs));
  }
  return 0;
}

int cmd_tcloss(const RunConfig& run, const std::string& fused_path,
               const std::string& vi_path, const std::string& ir_path,
               const std::string& out, bool as_json) {
  ivf::TcConfig cfg;
  KeyBinder binder;
  binder.integer("tc.blur_k", &cfg.blur_k);
  binder.number("tc.blur_sigma", &cfg.blur_sigma);
  binder.integer("tc.search_radius", &cfg.search_radius);
  binder.number("tc.charbonnier_eps", &cfg.charbonnier_eps);
  binder.number("tc.softmax_temp", &cfg.softmax_temp);
  binder.number("tc.conf_gain", &cfg.conf_gain);
  binder.number("tc.w_shift", &cfg.w_shift);
  binder.number("tc.w_align", &cfg.w_align);
  binder.number("tc.w_grad", &cfg.w_grad);
  binder.number("tc.huber_delta", &cfg.huber_delta);
  binder.number("tc.norm_eps", &cfg.norm_eps);
  binder.apply(run.overrides());

  const ivf::Clip fused = ivf::load_clip(fused_path);
  const ivf::Clip vi = ivf::load_clip(vi_path);
  const ivf::Clip ir = ivf::load_clip(ir_path);
  const ivf::TcBreakdown loss = ivf::tc_loss(fused, vi, ir, cfg);

  if (!as_json) {
    std::string text;
    text += "l_shift " + ivf::fmt_g9(loss.l_shift) + "\n";
    text += "l_align " + ivf::fmt_g9(loss.l_align) + "\n";
    text += "l_grad " + ivf::fmt_g9(loss.l_grad) + "\n";
    text += "total " + ivf::fmt_g9(loss.total) + "\n";
    emit_text(out, text);
    return 0;
  }

  json j;
  j["schema"] = 1;
  j["l_shift"] = r9(loss.l_shift);
  j["l_align"] = r9(loss.l_align);
  j["l_grad"] = r9(loss.l_grad);
  j["total"] = r9(loss.total);
  j["center"] = loss.center;
  j["per_neighbor"] = json::array();
  for (const auto& n : loss.per_neighbor) {
    json e;
    e["frame"] = n.frame;
    e["vi_u"] = r9(n.vi.u);
    e["vi_v"] = r9(n.vi.v);
    e["ir_u"] = r9(n.ir.u);
    e["ir_v"] = r9(n.ir.v);
    e["fused_u"] = r9(n.fused.u);
    e["fused_v"] = r9(n.fused.v);
    e["ref_u"] = r9(n.ref_u);
    e["ref_v"] = r9(n.ref_v);
    e["conf_vi"] = r9(n.vi.confidence);
    e["conf_ir"] = r9(n.ir.confidence);
    e["w_vi"] = r9(n.w_vi);
    e["w_ir"] = r9(n.w_ir);
    e["shift_err"] = r9(n.shift_err);
    e["align_resid"] = r9(n.align_resid);
    e["grad_resid"] = r9(n.grad_resid);
    j["per_neighbor"].push_back(e);
  }
  emit_text(out, j.dump(2) + "\n");
  return 0;
}

int cmd_metrics(const RunConfig& run, const std::string& ir_path,
                const std::string& vi_path, const std::string& fused_path,
                const std::string& which, const std::string& out,
                const std::string& dump_maps) {
  if (which != "mmci" && which != "tcpe" && which != "both") {
    throw ivf::ParameterError("--which expects mmci, tcpe, or both, got '" + which +
                              "'");
  }
  ivf::MmciConfig mcfg;
  ivf::TcpeConfig tcfg;
  KeyBinder binder;
  binder.integer("mmci.mix_window", &mcfg.mix_window);
  binder.integer("mmci.smooth_k", &mcfg.smooth_k);
  binder.number("mmci.smooth_sigma", &mcfg.smooth_sigma);
  binder.number("mmci.lambda_alpha", &mcfg.lambda_alpha);
  binder.number("mmci.scale", &mcfg.scale);
  binder.integer("tcpe.window_len", &tcfg.window_len);
  binder.integer("tcpe.stride", &tcfg.stride);
  binder.integer("tcpe.contrast_window", &tcfg.contrast_window);
  binder.apply(run.overrides());

  const ivf::Clip ir = ivf::load_clip(ir_path);
  const ivf::Clip vi = ivf::load_clip(vi_path);
  const ivf::Clip fused = ivf::load_clip(fused_path);

  json j;
  j["schema"] = 1;
  if (which != "tcpe") {
    const ivf::MmciResult m = ivf::mmci(ir, vi, fused, mcfg);
    j["mmci"] = {{"value", r9(m.value)},
                 {"j_alpha", r9(m.j_alpha)},
                 {"j_r", r9(m.j_r)},
                 {"mix_window", mcfg.mix_window},
                 {"smooth_k", mcfg.smooth_k},
                 {"smooth_sigma", r9(mcfg.smooth_sigma)},
                 {"lambda_alpha", r9(mcfg.lambda_alpha)},
                 {"scale", r9(mcfg.scale)}};
    if (!dump_maps.empty()) {
      ivf::save_clip_raw(
          (std::filesystem::path(dump_maps) / "mmci_alpha").string(), m.alpha);
    }
  }
  if (which != "mmci") {
    const ivf::TcpeResult t = ivf::tcpe(ir, vi, fused, tcfg);
    json windows = json::array();
    for (double e : t.window_errors) windows.push_back(r9(e));
    j["tcpe"] = {{"value", r9(t.value)},
                 {"window_errors", windows},
                 {"window_len", tcfg.window_len},
                 {"stride", tcfg.stride},
                 {"contrast_window", tcfg.contrast_window}};
    if (!dump_maps.empty()) {
      ivf::save_clip_raw(
          (std::filesystem::path(dump_maps) / "tcpe_errors").string(), t.e_maps);
    }
  }
  emit_text(out, j.dump(2) + "\n");
  return 0;
}

int cmd_perturb(const RunConfig& run, const std::string& in, const std::string& family,
                double strength, const std::string& out, const std::string& ir_path,
                const std::string& vi_path, const std::string& log_path) {
  const ivf::PerturbSpec spec{ivf::family_from_string(family), strength, run.seed};
  const ivf::Clip clip = ivf::load_clip(in);
  std::optional<ivf::Clip> ir, vi;
  if (!ir_path.empty()) ir = ivf::load_clip(ir_path);
  if (!vi_path.empty()) vi = ivf::load_clip(vi_path);

  ivf::PerturbLog log;
  const ivf::Clip result = ivf::apply_perturbation(
      clip, spec, ir ? &*ir : nullptr, vi ? &*vi : nullptr, &log);
  ivf::save_clip_raw(out, result);

  if (!log_path.empty()) {
    json j;
    j["schema"] = 1;
    j["family"] = family;
    j["strength"] = r9(strength);
    j["seed"] = run.seed;
    json gains = json::array();
    for (double g : log.gains) gains.push_back(r9(g));
    j["gains"] = gains;
    json shifts = json::array();
    for (const auto& s : log.jitter_shifts) shifts.push_back({r9(s[0]), r9(s[1])});
    j["jitter_shifts"] = shifts;
    j["permutation"] = log.permutation;
    json drift = json::array();
    for (double a : log.drift_alpha) drift.push_back(r9(a));
    j["drift_alpha"] = drift;
    j["misalign_peak"] = r9(log.misalign_peak);
    ivf::write_text_file(log_path, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_freq_analysis(const RunConfig& run, const std::string& in,
                      const std::string& family, const std::string& strengths,
                      int cutoff, const std::string& aux_path, const std::string& out) {
  const ivf::PerturbFamily fam = ivf::family_from_string(family);
  const std::vector<double> levels = parse_number_list(strengths, "--strengths");
  const ivf::Clip clip = ivf::load_clip(in);
  std::optional<ivf::Clip> aux;
  if (!aux_path.empty()) aux = ivf::load_clip(aux_path);

  const auto reports =
      ivf::energy_sweep(clip, aux ? &*aux : nullptr, fam, run.seed, levels, cutoff);

  std::string csv = "perturbation,strength,E_L,E_H,R_L,eta_L,eta_H\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    csv += std::string(ivf::family_name(fam)) + "," + ivf::fmt_g9(levels[i]) + "," +
           ivf::fmt_g9(r.e_low) + "," + ivf::fmt_g9(r.e_high) + "," +
           ivf::fmt_g9(r.r_low) + "," + ivf::fmt_g9(r.eta_low) + "," +
           ivf::fmt_g9(r.eta_high) + "\n";
  }
  emit_text(out, csv);
  return 0;
}

int cmd_stressbench(const RunConfig& run, const std::string& corpus_path, int synthetic,
                    int frames, int height, int width, const std::string& out,
                    std::string format) {
  std::vector<ivf::ClipTriple> corpus;
  if (!corpus_path.empty()) {
    corpus = ivf::load_corpus_manifest(corpus_path);
  } else if (synthetic > 0) {
    corpus = ivf::synth_bench_corpus(synthetic, frames, height, width, run.seed);
  } else {
    throw ivf::ParameterError("stressbench needs --corpus or --synthetic");
  }

  if (format.empty()) {
    const std::string ext = std::filesystem::path(out).extension().string();
    format = ext == ".json" ? "json" : ext == ".md" ? "markdown" : "csv";
  }
  const ivf::BenchTable table =
      ivf::run_bench(corpus, ivf::default_bench_families(), ivf::default_bench_levels(),
                     ivf::default_metrics(), run.seed);
  emit_text(out, ivf::emit_table(table, ivf::table_format_from_string(format)));
  return 0;
}

int cmd_synth(const RunConfig& run, const std::string& kind, const std::string& out,
              int t, int c, int h, int w, int count) {
  if (kind == "textured") {
    ivf::save_clip_raw(out, ivf::synth_textured_clip(t, c, h, w, run.seed));
  } else if (kind == "energy") {
    ivf::save_clip_raw(out, ivf::synth_energy_clip(t, c, h, w, run.seed));
  } else if (kind == "bench") {
    const auto corpus = ivf::synth_bench_corpus(count, t, h, w, run.seed);
    const std::filesystem::path base(out);
    json manifest;
    manifest["schema"] = 1;
    manifest["sequences"] = json::array();
    for (const auto& triple : corpus) {
      const std::filesystem::path dir = base / triple.name;
      ivf::save_clip_raw((dir / "ir").string(), triple.ir);
      ivf::save_clip_raw((dir / "vi").string(), triple.vi);
      ivf::save_clip_raw((dir / "fused").string(), triple.fused);
      json e;
      e["name"] = triple.name;
      e["ir"] = triple.name + "/ir";
      e["vi"] = triple.name + "/vi";
      e["fused"] = triple.name + "/fused";
      manifest["sequences"].push_back(e);
    }
    std::filesystem::create_directories(base);
    ivf::write_text_file((base / "manifest.json").string(), manifest.dump(2) + "\n");
  } else {
    throw ivf::ParameterError("unknown synth kind: " + kind +
                              " (expected textured, energy, or bench)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"infrared-visible video fusion analysis toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig run;
  app.add_option("--seed", run.seed, "global RNG seed")->capture_default_str();
  app.add_option("--config", run.config_path,
                 "JSON file of dotted config overrides (flat object)");
  app.add_option("--set", run.sets, "config override key=value (repeatable)");

  std::function<int()> action;

  {
    auto* sub = app.add_subcommand("decompose",
                                   "split a clip into low/high frequency parts");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto logits = std::make_shared<std::string>();
    sub->add_option("--in", *in, "input clip (png dir or raw pair)")->required();
    sub->add_option("--out", *out, "output directory")->required();
    sub->add_option("--logits", *logits, "kernel weight logits, e.g. 0,0,0");
    sub->callback([&, in, out, logits] {
      action = [&, in, out, logits] { return cmd_decompose(run, *in, *out, *logits); };
    });
  }
  {
    auto* sub = app.add_subcommand("dfam-forward", "run the fusion block forward pass");
    auto ir = std::make_shared<std::string>();
    auto vi = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto stage = std::make_shared<int>(-1);
    auto lambda = std::make_shared<double>(1.0);
    auto dump_sel = std::make_shared<bool>(false);
    auto dump_lf = std::make_shared<bool>(false);
    sub->add_option("--ir", *ir, "infrared feature clip")->required();
    sub->add_option("--vi", *vi, "visible feature clip")->required();
    sub->add_option("--out", *out, "output directory")->required();
    sub->add_option("--scale-stage", *stage, "scale stage preset 0..2 (sparse ratio)");
    sub->add_option("--lambda-hf", *lambda, "high-frequency gain")
        ->capture_default_str();
    sub->add_flag("--dump-selection", *dump_sel,
                  "write selected block indices as JSON");
    sub->add_flag("--dump-lf", *dump_lf,
                  "write low-frequency branch intermediates as raw-f32");
    sub->callback([&, ir, vi, out, stage, lambda, dump_sel, dump_lf] {
      action = [&, ir, vi, out, stage, lambda, dump_sel, dump_lf] {
        return cmd_dfam_forward(run, *ir, *vi, *out, *stage, *lambda, *dump_sel,
                                *dump_lf);
      };
    });
  }
  {
    auto* sub = app.add_subcommand("tcloss", "temporal-consistency loss breakdown");
    auto fused = std::make_shared<std::string>();
    auto vi = std::make_shared<std::string>();
    auto ir = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto as_json = std::make_shared<bool>(false);
    sub->add_option("--fused", *fused, "fused clip")->required();
    sub->add_option("--vi", *vi, "visible source clip")->required();
    sub->add_option("--ir", *ir, "infrared source clip")->required();
    sub->add_option("--out", *out, "output path (default stdout)");
    sub->add_flag("--json", *as_json, "emit full JSON breakdown with per-neighbor detail");
    sub->callback([&, fused, vi, ir, out, as_json] {
      action = [&, fused, vi, ir, out, as_json] {
        return cmd_tcloss(run, *fused, *vi, *ir, *out, *as_json);
      };
    });
  }
  {
    auto* sub = app.add_subcommand("metrics", "MMCI and TCPE quality metrics");
    auto ir = std::make_shared<std::string>();
    auto vi = std::make_shared<std::string>();
    auto fused = std::make_shared<std::string>();
    auto which = std::make_shared<std::string>("both");
    auto out = std::make_shared<std::string>();
    auto dump_maps = std::make_shared<std::string>();
    sub->add_option("--ir", *ir, "infrared source clip")->required();
    sub->add_option("--vi", *vi, "visible source clip")->required();
    sub->add_option("--fused", *fused, "fused clip")->required();
    sub->add_option("--which", *which, "mmci|tcpe|both")->capture_default_str();
    sub->add_option("--out", *out, "output JSON path (default stdout)");
    sub->add_option("--dump-maps", *dump_maps,
                    "write alpha/error maps as raw-f32 into this directory");
    sub->callback([&, ir, vi, fused, which, out, dump_maps] {
      action = [&, ir, vi, fused, which, out, dump_maps] {
        return cmd_metrics(run, *ir, *vi, *fused, *which, *out, *dump_maps);
      };
    });
  }
  {
    auto* sub = app.add_subcommand("perturb", "apply a corruption family to a clip");
    auto in = std::make_shared<std::string>();
    auto family = std::make_shared<std::string>();
    auto strength = std::make_shared<double>(0.0);
    auto out = std::make_shared<std::string>();
    auto ir = std::make_shared<std::string>();
    auto vi = std::make_shared<std::string>();
    auto log = std::make_shared<std::string>();
    sub->add_option("--in", *in, "input clip")->required();
    sub->add_option("--family", *family,
                    "flicker|jitter|local_misalignment|modality_drift|temporal_shuffle|mixed_hard")
        ->required();
    sub->add_option("--strength", *strength, "corruption strength, >= 0")->required();
    sub->add_option("--out", *out, "output clip path")->required();
    sub->add_option("--ir", *ir, "infrared source (modality_drift)");
    sub->add_option("--vi", *vi, "visible source (modality_drift)");
    sub->add_option("--log", *log, "write draw log JSON here");
    sub->callback([&, in, family, strength, out, ir, vi, log] {
      action = [&, in, family, strength, out, ir, vi, log] {
        return cmd_perturb(run, *in, *family, *strength, *out, *ir, *vi, *log);
      };
    });
  }
  {
    auto* sub = app.add_subcommand("freq-analysis",
                                   "temporal energy sweep across corruption strengths");
    auto in = std::make_shared<std::string>();
    auto family = std::make_shared<std::string>("flicker");
    auto strengths = std::make_shared<std::string>("0");
    auto cutoff = std::make_shared<int>(1);
    auto aux = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--in", *in, "input clip")->required();
    sub->add_option("--family", *family, "corruption family")->capture_default_str();
    sub->add_option("--strengths", *strengths, "comma-separated, first must be 0")
        ->capture_default_str();
    sub->add_option("--cutoff", *cutoff, "low-band cutoff in DFT bins")
        ->capture_default_str();
    sub->add_option("--aux", *aux, "second source clip (modality_drift)");
    sub->add_option("--out", *out, "output CSV path (default stdout)");
    sub->callback([&, in, family, strengths, cutoff, aux, out] {
      action = [&, in, family, strengths, cutoff, aux, out] {
        return cmd_freq_analysis(run, *in, *family, *strengths, *cutoff, *aux, *out);
      };
    });
  }
  {
    auto* sub = app.add_subcommand("stressbench",
                                   "metric ranking table over a corrupted corpus");
    auto corpus = std::make_shared<std::string>();
    auto synthetic = std::make_shared<int>(0);
    auto frames = std::make_shared<int>(16);
    auto height = std::make_shared<int>(48);
    auto width = std::make_shared<int>(48);
    auto out = std::make_shared<std::string>();
    auto format = std::make_shared<std::string>();
    sub->add_option("--corpus", *corpus, "manifest.json listing ir/vi/fused triples");
    sub->add_option("--synthetic", *synthetic, "generate N synthetic triples instead");
    sub->add_option("--frames", *frames, "synthetic clip length")->capture_default_str();
    sub->add_option("--height", *height, "synthetic clip height")->capture_default_str();
    sub->add_option("--width", *width, "synthetic clip width")->capture_default_str();
    sub->add_option("--out", *out, "output table path (default stdout)");
    sub->add_option("--format", *format, "csv|json|markdown (default from extension)");
    sub->callback([&, corpus, synthetic, frames, height, width, out, format] {
      action = [&, corpus, synthetic, frames, height, width, out, format] {
        return cmd_stressbench(run, *corpus, *synthetic, *frames, *height, *width, *out,
                               *format);
      };
    });
  }
  {
    auto* sub = app.add_subcommand("synth", "generate seeded synthetic clips");
    auto kind = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto t = std::make_shared<int>(16);
    auto c = std::make_shared<int>(1);
    auto h = std::make_shared<int>(48);
    auto w = std::make_shared<int>(48);
    auto count = std::make_shared<int>(10);
    sub->add_option("--kind", *kind, "textured|energy|bench")->required();
    sub->add_option("--out", *out, "output path")->required();
    sub->add_option("--frames", *t, "frames")->capture_default_str();
    sub->add_option("--channels", *c, "channels")->capture_default_str();
    sub->add_option("--height", *h, "height")->capture_default_str();
    sub->add_option("--width", *w, "width")->capture_default_str();
    sub->add_option("--count", *count, "sequence count (bench)")->capture_default_str();
    sub->callback([&, kind, out, t, c, h, w, count] {
      action = [&, kind, out, t, c, h, w, count] {
        return cmd_synth(run, *kind, *out, *t, *c, *h, *w, *count);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return action ? action() : 2;
  } catch (const ivf::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ivf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
