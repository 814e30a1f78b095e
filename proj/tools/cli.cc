// tools/cli.cc

// Copyright 2026  The teachtext authors

// See the top-level COPYING file for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "teachtext/data.h"
#include "teachtext/denoise.h"
#include "teachtext/encoder.h"
#include "teachtext/error.h"
#include "teachtext/gradcheck.h"
#include "teachtext/metrics.h"
#include "teachtext/trainer.h"

namespace teachtext {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Training flags. Anything left unset keeps the value from the config file
// (or the built-in default when there is no config file).
struct TrainFlags {
  std::string config;
  std::string data;
  std::string out;
  std::string log;
  std::string keep_captions;
  std::optional<std::size_t> epochs, batch_size, rank_k, shared_dim;
  std::optional<double> lr, wd, margin, distill_weight;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> aggregation;
  std::vector<std::string> modalities;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "Flat JSON config (keys mirror TrainConfig)");
    cmd->add_option("--data", data, "Feature store directory")->required();
    cmd->add_option("--out", out, "Output model file")->required();
    cmd->add_option("--log", log, "Training log (default: <out>.log.json)");
    cmd->add_option("--keep-captions", keep_captions,
                    "Caption list from denoise; training captions not listed are dropped");
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--batch-size", batch_size);
    cmd->add_option("--lr", lr);
    cmd->add_option("--weight-decay", wd);
    cmd->add_option("--margin", margin);
    cmd->add_option("--distill-weight", distill_weight);
    cmd->add_option("--aggregation", aggregation, "mean|min|max");
    cmd->add_option("--rank-k", rank_k);
    cmd->add_option("--seed", seed);
    cmd->add_option("--shared-dim", shared_dim);
    cmd->add_option("--modalities", modalities, "Comma-separated modality ids")->delimiter(',');
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!config.empty()) cfg = config_from_json(read_json(config), cfg);
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (lr) cfg.learning_rate = *lr;
    if (wd) cfg.weight_decay = *wd;
    if (margin) cfg.margin = *margin;
    if (distill_weight) cfg.distill_weight = *distill_weight;
    if (aggregation) cfg.aggregation = parse_aggregation(*aggregation);
    if (rank_k) cfg.rank_k = *rank_k;
    if (seed) cfg.seed = *seed;
    if (shared_dim) cfg.shared_dim = *shared_dim;
    return cfg;
  }

  FeatureStore load() const {
    FeatureStore store = load_store(data);
    if (keep_captions.empty()) return store;
    return store.with_captions(read_caption_list(keep_captions, store));
  }

  void write(const TrainResult& r, const TrainConfig& cfg) const {
    save_model(out, r.params);
    write_json(log.empty() ? fs::path(out + ".log.json") : fs::path(log), r.log_json(cfg));
    std::cout << "wrote " << out << " (best epoch " << r.best_epoch << ", val t2v geomean "
              << r.best_val_geomean << ")\n";
  }
};

TeacherPool load_teachers(const std::vector<std::string>& paths) {
  TeacherPool pool;
  for (const auto& p : paths) pool.teachers.push_back(load_model(p));
  return pool;
}

int cmd_synth(const SynthOptions& opts, const std::string& out) {
  const SynthCorpus corpus = synth_corpus(opts);
  write_synth_corpus(out, corpus);
  std::cout << "wrote " << corpus.store.num_videos() << " videos, "
            << corpus.store.num_captions() << " captions to " << out << "\n";
  return kExitOk;
}

int cmd_train_teacher(const TrainFlags& f, const std::string& text_encoder) {
  TrainConfig cfg = f.resolve();
  if (!f.modalities.empty()) cfg.teacher_modalities = f.modalities;
  const FeatureStore store = f.load();
  store.text_encoder_index(text_encoder);
  f.write(train_teacher(store, cfg, text_encoder), cfg);
  return kExitOk;
}

int cmd_train_student(const TrainFlags& f, const std::string& text_encoder,
                      const std::vector<std::string>& teachers, const std::string& mode,
                      const std::optional<std::string>& distill) {
  TrainConfig cfg = f.resolve();
  if (!text_encoder.empty()) cfg.student_text_encoder_id = text_encoder;
  if (!f.modalities.empty()) cfg.student_modalities = f.modalities;
  if (distill) cfg.distill_variant = parse_distill_variant(*distill);
  if (mode == "none") cfg.distill_variant = DistillVariant::kNone;
  if (mode != "none" && mode != "teachtext" && mode != "teachvideo") {
    throw ConfigError("unknown mode '" + mode + "'");
  }

  const FeatureStore store = f.load();
  if (cfg.distill_variant == DistillVariant::kNone) {
    if (!teachers.empty()) std::cerr << "warning: no distillation; --teachers ignored\n";
    f.write(train_student(store, cfg, TeacherPool{}), cfg);
    return kExitOk;
  }
  if (teachers.empty()) throw ConfigError("--teachers is required for distillation");
  TeacherPool pool = load_teachers(teachers);
  if (mode == "teachvideo") {
    if (pool.teachers.size() != 1) throw ConfigError("teachvideo takes exactly one teacher");
    f.write(train_student_teachvideo(store, cfg, pool.teachers[0]), cfg);
  } else {
    f.write(train_student(store, cfg, pool), cfg);
  }
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& split,
             const std::string& task, const std::string& report) {
  const Split s = parse_split(split);
  const Task t = parse_task(task);
  const DualEncoderParams model = load_model(model_path);
  const FeatureStore store = load_store(data);
  const MetricsReport r = evaluate(model, store, s, t);
  const json j = to_json(r);
  if (!report.empty()) write_json(report, j);
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_denoise(const std::vector<std::string>& teachers, const std::string& data,
                std::size_t threshold, const std::string& out) {
  if (threshold < 1) throw ConfigError("--rank-threshold must be at least 1");
  const FeatureStore store = load_store(data);
  const TeacherPool pool = load_teachers(teachers);
  const FilterResult filtered = filter_captions(score_caption_ranks(pool, store), threshold);
  json summary = filtered.summary();
  if (has_ambiguity_ledger(data)) {
    const DetectionStats d = detection_stats(filtered, load_ambiguity_ledger(data, store));
    summary["precision"] = d.precision;
    summary["recall"] = d.recall;
    std::cout << "ambiguity detection: precision " << d.precision << ", recall " << d.recall
              << "\n";
  }
  write_filter_outputs(out, store, filtered, summary);
  std::cout << "kept " << filtered.kept.size() << ", dropped " << filtered.dropped.size()
            << "\n";
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t trials, bool inject_fault) {
  const GradCheckReport r = run_gradient_suite(
      seed, trials, inject_fault ? GradFault::kScaleRankingGrad : GradFault::kNone);
  for (const auto& e : r.entries) {
    std::printf("%-40s checks=%-4zu max_rel_err=%.3e\n", e.name.c_str(), e.checks,
                e.max_rel_error);
  }
  std::printf("trials=%zu resampled=%zu max_rel_err=%.3e tolerance=%.0e %s\n", r.trials,
              r.resampled, r.max_rel_error, kGradTolerance, r.passed() ? "PASS" : "FAIL");
  return r.passed() ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Multi-teacher distillation for text-video retrieval over precomputed features"};
  app.require_subcommand(1);
  int code = kExitOk;

  SynthOptions synth;
  std::string synth_out;
  auto* c_synth = app.add_subcommand("synth", "Write a seeded synthetic feature store");
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--videos", synth.n_videos);
  c_synth->add_option("--captions-per-video", synth.captions_per_video);
  c_synth->add_option("--modalities", synth.n_modalities);
  c_synth->add_option("--text-encoders", synth.n_text_encoders);
  c_synth->add_option("--text-noise", synth.text_noise, "Per-encoder noise std")->delimiter(',');
  c_synth->add_option("--ambiguous-fraction", synth.ambiguous_fraction);
  c_synth->add_option("--out", synth_out)->required();

  TrainFlags teacher_flags;
  std::string teacher_te;
  auto* c_teacher = app.add_subcommand("train-teacher", "Train one teacher (ranking loss only)");
  teacher_flags.attach(c_teacher);
  c_teacher->add_option("--text-encoder", teacher_te)->required();

  TrainFlags student_flags;
  std::string student_te;
  std::vector<std::string> student_teachers;
  std::string mode = "teachtext";
  std::optional<std::string> distill;
  auto* c_student = app.add_subcommand("train-student", "Train a student against frozen teachers");
  student_flags.attach(c_student);
  c_student->add_option("--text-encoder", student_te, "Student text encoder id");
  c_student->add_option("--teachers", student_teachers, "Comma-separated teacher model files")
      ->delimiter(',');
  c_student->add_option("--mode", mode, "teachtext|teachvideo|none");
  c_student->add_option("--distill", distill,
                        "none|huber|l1|l2|rank-k|pdist|relational|embed-regress");

  std::string eval_model, eval_data, eval_split = "test", eval_task = "t2v", eval_report;
  auto* c_eval = app.add_subcommand("eval", "Retrieval metrics on one split");
  c_eval->add_option("--model", eval_model)->required();
  c_eval->add_option("--data", eval_data)->required();
  c_eval->add_option("--split", eval_split, "train|val|test");
  c_eval->add_option("--task", eval_task, "t2v|v2t");
  c_eval->add_option("--report", eval_report, "Write the report JSON here");

  std::vector<std::string> dn_teachers;
  std::string dn_data, dn_out;
  std::size_t dn_threshold = 40;
  auto* c_denoise = app.add_subcommand("denoise", "Filter training captions by teacher rank");
  c_denoise->add_option("--teachers", dn_teachers)->required()->delimiter(',');
  c_denoise->add_option("--data", dn_data)->required();
  c_denoise->add_option("--rank-threshold", dn_threshold);
  c_denoise->add_option("--out", dn_out)->required();

  std::uint64_t gc_seed = 0;
  std::size_t gc_trials = 20;
  bool gc_fault = false;
  auto* c_grad = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  c_grad->add_option("--seed", gc_seed);
  c_grad->add_option("--trials", gc_trials);
  c_grad->add_flag("--inject-fault", gc_fault)->group("");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*c_synth) code = cmd_synth(synth, synth_out);
    if (*c_teacher) code = cmd_train_teacher(teacher_flags, teacher_te);
    if (*c_student) {
      code = cmd_train_student(student_flags, student_te, student_teachers, mode, distill);
    }
    if (*c_eval) code = cmd_eval(eval_model, eval_data, eval_split, eval_task, eval_report);
    if (*c_denoise) code = cmd_denoise(dn_teachers, dn_data, dn_threshold, dn_out);
    if (*c_grad) code = cmd_gradcheck(gc_seed, gc_trials, gc_fault);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return code;
}

}  // namespace teachtext
