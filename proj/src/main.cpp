// saeda — command-line front end.
//
//   generate   build the synthetic paired-modality dataset splits + truth.json
//   train      run the three-stage adaptation pipeline, checkpointing each stage
//   evaluate   score a trained model on a dataset against hidden ground truth
//   plot       render a confusion-matrix heatmap or embedding scatter to PNG
//   diagnose   report the matched/mismatched class discrepancy before and
//              after stage 1
//
// Exit codes: 0 success (all trained stages converged), 2 an executed stage
// hit its epoch cap without converging, 1 any error. Every command writes
// run_meta.json into its output directory; that file is the only artifact
// containing wall-clock timestamps.

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "saeda/datagen.hpp"
#include "saeda/dataset.hpp"
#include "saeda/errors.hpp"
#include "saeda/eval.hpp"
#include "saeda/kernels.hpp"
#include "saeda/model.hpp"
#include "saeda/pipeline.hpp"
#include "saeda/plot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace saeda;

namespace {

// --------------------------------------------------------------- run config

struct RunConfig {
  std::string task = "classification";
  std::string output_dir = "run";
  bool inline_dataset = false; // dataset generated from `dataset` vs loaded from dirs
  DatasetConfig dataset;
  std::string dir_source, dir_target_labeled, dir_target_unlabeled;
  TrainingConfig training;
  bool skip_stage3 = false;
};

json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrCode::io_error, "cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrCode::bad_config, "config " + path + ": " + e.what());
  }
}

// schema helpers — every message carries the full key path
void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known |= it.key() == k;
    if (!known) fail(ErrCode::bad_config, "config: unknown key '" + path + it.key() + "'");
  }
}

const json* opt_key(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

template <typename T>
T get_num(const json& obj, const std::string& path, const char* key, T fallback) {
  const json* v = opt_key(obj, key);
  if (!v) return fallback;
  if constexpr (std::is_integral_v<T>) {
    if (!v->is_number_integer())
      fail(ErrCode::bad_config, "config: '" + path + key + "' must be an integer");
  } else {
    if (!v->is_number()) fail(ErrCode::bad_config, "config: '" + path + key + "' must be a number");
  }
  return v->get<T>();
}

std::string get_str(const json& obj, const std::string& path, const char* key,
                    const std::string& fallback) {
  const json* v = opt_key(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) fail(ErrCode::bad_config, "config: '" + path + key + "' must be a string");
  return v->get<std::string>();
}

Shape3 get_shape(const json& obj, const std::string& path, const char* key, Shape3 fallback) {
  const json* v = opt_key(obj, key);
  if (!v) return fallback;
  if (!v->is_array() || v->size() != 3 || !(*v)[0].is_number_integer() ||
      !(*v)[1].is_number_integer() || !(*v)[2].is_number_integer())
    fail(ErrCode::bad_config,
         "config: '" + path + key + "' must be an array of 3 integers [h, w, c]");
  return {(*v)[0].get<int>(), (*v)[1].get<int>(), (*v)[2].get<int>()};
}

DatasetConfig parse_dataset_block(const json& d, const std::string& path) {
  if (!d.is_object()) fail(ErrCode::bad_config, "config: '" + path + "' must be an object");
  check_keys(d, path + ".", {"num_classes", "samples_per_class_source",
                             "samples_per_class_target_labeled",
                             "samples_per_class_target_unlabeled", "source_shape", "target_shape",
                             "noise_sigma_source", "noise_sigma_target", "jitter_sigma", "seed"});
  DatasetConfig c;
  const std::string p = path + ".";
  c.num_classes = get_num(d, p, "num_classes", c.num_classes);
  c.samples_per_class_source = get_num(d, p, "samples_per_class_source",
                                       c.samples_per_class_source);
  c.samples_per_class_target_labeled =
      get_num(d, p, "samples_per_class_target_labeled", c.samples_per_class_target_labeled);
  c.samples_per_class_target_unlabeled =
      get_num(d, p, "samples_per_class_target_unlabeled", c.samples_per_class_target_unlabeled);
  c.source_shape = get_shape(d, p, "source_shape", c.source_shape);
  c.target_shape = get_shape(d, p, "target_shape", c.target_shape);
  c.noise_sigma_source = get_num(d, p, "noise_sigma_source", (double)c.noise_sigma_source);
  c.noise_sigma_target = get_num(d, p, "noise_sigma_target", (double)c.noise_sigma_target);
  c.jitter_sigma = get_num(d, p, "jitter_sigma", (double)c.jitter_sigma);
  c.seed = get_num(d, p, "seed", c.seed);
  return c;
}

TrainingConfig parse_training_block(const json& t, const std::string& path) {
  if (!t.is_object()) fail(ErrCode::bad_config, "config: '" + path + "' must be an object");
  check_keys(t, path + ".",
             {"learning_rate", "batch_size", "max_epochs_per_stage", "min_rel_improvement",
              "patience", "beta", "bottleneck_size", "classifier_hidden", "seed"});
  TrainingConfig c;
  const std::string p = path + ".";
  c.learning_rate = get_num(t, p, "learning_rate", (double)c.learning_rate);
  c.batch_size = get_num(t, p, "batch_size", c.batch_size);
  c.max_epochs_per_stage = get_num(t, p, "max_epochs_per_stage", c.max_epochs_per_stage);
  c.min_rel_improvement = get_num(t, p, "min_rel_improvement", (double)c.min_rel_improvement);
  c.patience = get_num(t, p, "patience", c.patience);
  c.loss.beta = get_num(t, p, "beta", (double)c.loss.beta);
  c.bottleneck_size = get_num(t, p, "bottleneck_size", c.bottleneck_size);
  c.seed = get_num(t, p, "seed", c.seed);
  if (const json* h = opt_key(t, "classifier_hidden")) {
    if (!h->is_array())
      fail(ErrCode::bad_config, "config: '" + p + "classifier_hidden' must be an array");
    c.classifier_hidden.clear();
    for (const auto& v : *h) {
      if (!v.is_number_integer())
        fail(ErrCode::bad_config, "config: '" + p + "classifier_hidden' entries must be integers");
      c.classifier_hidden.push_back(v.get<int>());
    }
  }
  return c;
}

TrainingConfig::CwsGrad parse_cws_grad(const std::string& v, const std::string& where) {
  if (v == "both") return TrainingConfig::CwsGrad::both;
  if (v == "target-only" || v == "target_only") return TrainingConfig::CwsGrad::target_only;
  fail(ErrCode::bad_config, where + " must be 'both' or 'target-only', got '" + v + "'");
}

RunConfig load_run_config(const std::string& path) {
  const json j = parse_json_file(path);
  if (!j.is_object()) fail(ErrCode::bad_config, "config: top level must be an object");
  check_keys(j, "", {"task", "output_dir", "dataset", "dataset_dirs", "training", "ablations"});

  RunConfig rc;
  rc.task = get_str(j, "", "task", rc.task);
  if (rc.task != "classification" && rc.task != "regression")
    fail(ErrCode::bad_config, "config: 'task' must be 'classification' or 'regression'");
  rc.output_dir = get_str(j, "", "output_dir", rc.output_dir);

  const json* ds = opt_key(j, "dataset");
  const json* dirs = opt_key(j, "dataset_dirs");
  if (!!ds == !!dirs)
    fail(ErrCode::bad_config, "config: exactly one of 'dataset' and 'dataset_dirs' is required");
  if (ds) {
    rc.inline_dataset = true;
    rc.dataset = parse_dataset_block(*ds, "dataset");
  } else {
    if (!dirs->is_object()) fail(ErrCode::bad_config, "config: 'dataset_dirs' must be an object");
    check_keys(*dirs, "dataset_dirs.", {"source", "target_labeled", "target_unlabeled"});
    rc.dir_source = get_str(*dirs, "dataset_dirs.", "source", "");
    rc.dir_target_labeled = get_str(*dirs, "dataset_dirs.", "target_labeled", "");
    rc.dir_target_unlabeled = get_str(*dirs, "dataset_dirs.", "target_unlabeled", "");
    if (rc.dir_source.empty() || rc.dir_target_labeled.empty() || rc.dir_target_unlabeled.empty())
      fail(ErrCode::bad_config,
           "config: 'dataset_dirs' needs 'source', 'target_labeled' and 'target_unlabeled'");
  }

  if (const json* t = opt_key(j, "training")) rc.training = parse_training_block(*t, "training");

  if (const json* a = opt_key(j, "ablations")) {
    if (!a->is_object()) fail(ErrCode::bad_config, "config: 'ablations' must be an object");
    check_keys(*a, "ablations.", {"beta_override", "cws_grad", "skip_stage3"});
    if (const json* b = opt_key(*a, "beta_override")) {
      if (!b->is_null()) {
        if (!b->is_number())
          fail(ErrCode::bad_config, "config: 'ablations.beta_override' must be a number or null");
        rc.training.loss.beta = b->get<float>();
      }
    }
    if (const json* g = opt_key(*a, "cws_grad"))
      rc.training.cws_grad =
          parse_cws_grad(g->get<std::string>(), "config: 'ablations.cws_grad'");
    if (const json* s = opt_key(*a, "skip_stage3")) {
      if (!s->is_boolean())
        fail(ErrCode::bad_config, "config: 'ablations.skip_stage3' must be a boolean");
      rc.skip_stage3 = s->get<bool>();
    }
  }

  rc.dataset.task = rc.task == "regression" ? DatasetConfig::Task::regression
                                            : DatasetConfig::Task::classification;
  return rc;
}

// --------------------------------------------------------------- data + specs

Dataset load_split(const std::string& dir, SplitTag expect) {
  Dataset d = load_dataset(dir);
  if (d.split != expect)
    fail(ErrCode::bad_config, "dataset at " + dir + " is the '" + split_name(d.split) +
                                  "' split, expected '" + split_name(expect) + "'");
  return d;
}

// datasets for train/diagnose: explicit dirs win; an inline config loads the
// generated copy under <output>/data when present and otherwise regenerates
// (bit-identical, the generator is seed-deterministic)
PairedData obtain_data(const RunConfig& rc) {
  if (!rc.inline_dataset) {
    PairedData d;
    d.source = load_split(rc.dir_source, SplitTag::source);
    d.target_labeled = load_split(rc.dir_target_labeled, SplitTag::target_labeled);
    d.target_unlabeled = load_split(rc.dir_target_unlabeled, SplitTag::target_unlabeled);
    return d;
  }
  const fs::path data_dir = fs::path(rc.output_dir) / "data";
  if (fs::exists(data_dir / "source" / "manifest.json")) {
    PairedData d;
    d.source = load_split((data_dir / "source").string(), SplitTag::source);
    d.target_labeled = load_split((data_dir / "target_labeled").string(),
                                  SplitTag::target_labeled);
    d.target_unlabeled = load_split((data_dir / "target_unlabeled").string(),
                                    SplitTag::target_unlabeled);
    return d;
  }
  return generate_paired(rc.dataset);
}

int class_count(const Dataset& source) {
  int c = (int)source.class_names.size();
  for (int l : source.labels) c = std::max(c, l + 1);
  return c;
}

struct ModelSpecs {
  AutoencoderSpec source, target;
  HeadSpec head;
};

ModelSpecs specs_for(const RunConfig& rc, const PairedData& data) {
  ModelSpecs s;
  s.source.input_shape = data.source.shape;
  s.target.input_shape = data.target_labeled.shape;
  if (rc.task == "regression") {
    s.head.kind = HeadSpec::Kind::linear_regressor;
    s.head.output_size = 1;
  } else {
    s.head.kind = HeadSpec::Kind::softmax_classifier;
    s.head.output_size = class_count(data.source);
  }
  return s;
}

// ----------------------------------------------------------------- run meta

std::string iso_utc(std::time_t t) {
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunMeta {
  std::string command;
  fs::path out_dir;
  std::time_t started = std::time(nullptr);
  json extra = json::object();

  // the single artifact allowed to differ between identical runs
  void write(int exit_code) const {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    json j;
    j["command"] = command;
    j["started"] = iso_utc(started);
    j["finished"] = iso_utc(std::time(nullptr));
    j["exit_code"] = exit_code;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream f(out_dir / "run_meta.json", std::ios::binary);
    f << j.dump(2) << "\n";
  }
};

// ----------------------------------------------------------------- commands

int cmd_generate(const RunConfig& rc, const std::string& config_path) {
  if (!rc.inline_dataset)
    fail(ErrCode::bad_config, "generate needs an inline 'dataset' block, not 'dataset_dirs'");
  RunMeta meta{"generate", rc.output_dir};
  meta.extra["config"] = config_path;
  meta.extra["seed"] = rc.dataset.seed;

  const PairedData data = generate_paired(rc.dataset);
  const fs::path base = fs::path(rc.output_dir) / "data";
  save_dataset(data.source, (base / "source").string());
  save_dataset(data.target_labeled, (base / "target_labeled").string());
  save_dataset(data.target_unlabeled, (base / "target_unlabeled").string());

  json truth;
  truth["task"] = rc.task;
  truth["labels"] = data.truth.labels;
  if (!data.truth.targets.empty()) truth["targets"] = data.truth.targets;
  truth["class_names"] = data.source.class_names;
  {
    std::ofstream f(fs::path(rc.output_dir) / "truth.json", std::ios::binary);
    if (!f) fail(ErrCode::io_error, "cannot write truth.json under " + rc.output_dir);
    f << truth.dump(2) << "\n";
  }

  auto row = [](const char* name, const Dataset& d, const char* labels) {
    std::printf("  %-18s %7d   %2dx%dx%d   %s\n", name, d.n, d.shape.h, d.shape.w, d.shape.c,
                labels);
  };
  std::printf("generated '%s' dataset under %s\n", rc.task.c_str(), base.string().c_str());
  std::printf("  %-18s %7s   %-9s %s\n", "split", "samples", "shape", "labels");
  row("source", data.source, "yes");
  row("target_labeled", data.target_labeled, "yes");
  row("target_unlabeled", data.target_unlabeled, "hidden (truth.json)");
  meta.write(0);
  return 0;
}

int cmd_train(const RunConfig& rc, const std::string& config_path, const std::string& resume) {
  RunMeta meta{"train", rc.output_dir};
  meta.extra["config"] = config_path;
  meta.extra["seed"] = rc.training.seed;

  const PairedData data = obtain_data(rc);
  const ModelSpecs specs = specs_for(rc, data);

  PipelineOptions opt;
  opt.checkpoint_dir = (fs::path(rc.output_dir) / "checkpoints").string();
  opt.resume = resume;
  opt.skip_stage3 = rc.skip_stage3;

  PipelineResult res = run_full_pipeline(data.source, data.target_labeled, data.target_unlabeled,
                                         specs.source, specs.target, specs.head, rc.training, opt);

  bool capped = false;
  for (const StageReport* r : {&res.stage1, &res.stage2, &res.stage3}) {
    if (r->stage == 0) continue; // not executed (resumed past it or skipped)
    std::printf("stage %d: %3d epochs, final loss %.6g, %s (%.1fs)\n", r->stage, r->epochs,
                r->final_loss, r->converged ? "converged" : "hit the epoch cap", r->seconds);
    capped |= !r->converged;
  }
  std::printf("checkpoints: %s\n", opt.checkpoint_dir.c_str());
  if (capped)
    std::fprintf(stderr,
                 "warning: at least one stage stopped at max_epochs_per_stage before the "
                 "convergence window was met\n");
  const int code = capped ? 2 : 0;
  meta.write(code);
  return code;
}

int cmd_evaluate(const std::string& model_dir, const std::string& dataset_dir,
                 const std::string& truth_path, const std::string& out_dir) {
  RunMeta meta{"evaluate", out_dir};
  meta.extra["model"] = model_dir;
  meta.extra["dataset"] = dataset_dir;

  AdaptationModel model = load_model(model_dir);
  const Dataset data = load_dataset(dataset_dir);

  const json truth = parse_json_file(truth_path);
  if (!truth.is_object() || !truth.contains("task") || !truth.contains("labels"))
    fail(ErrCode::bad_config, "truth file " + truth_path + ": missing 'task' or 'labels'");
  const std::string task = truth["task"].get<std::string>();
  const std::vector<int> truth_labels = truth["labels"].get<std::vector<int>>();
  if ((int)truth_labels.size() != data.n)
    fail(ErrCode::size_mismatch, "truth file has " + std::to_string(truth_labels.size()) +
                                     " labels for " + std::to_string(data.n) + " samples");

  const bool regressor = model.head.spec.kind == HeadSpec::Kind::linear_regressor;
  if (regressor != (task == "regression"))
    fail(ErrCode::kind_mismatch, "model is a " +
                                     std::string(regressor ? "regressor" : "classifier") +
                                     " but the truth file says task '" + task + "'");

  // skip-stage3 ablation models evaluate straight off the stage-2 head
  const Predictions pred = predict(model, data, model.stage3_done);

  fs::create_directories(out_dir);
  EvalReport report;
  report.task = task;
  double metric = 0;
  std::vector<std::string> names = truth.contains("class_names")
                                       ? truth["class_names"].get<std::vector<std::string>>()
                                       : std::vector<std::string>{};
  if (task == "classification") {
    int c = (int)names.size();
    for (int l : truth_labels) c = std::max(c, l + 1);
    const ClassificationMetrics m = classification_metrics(truth_labels, pred.labels, c);
    report.accuracy = m.accuracy;
    report.confusion = m.confusion;
    report.class_names = names;
    metric = m.accuracy;
    write_confusion_csv(m.confusion, names, (fs::path(out_dir) / "confusion.csv").string());
  } else {
    if (!truth.contains("targets"))
      fail(ErrCode::bad_config, "truth file " + truth_path + ": regression needs 'targets'");
    const auto targets = truth["targets"].get<std::vector<float>>();
    if ((int)targets.size() != data.n)
      fail(ErrCode::size_mismatch, "truth file has " + std::to_string(targets.size()) +
                                       " targets for " + std::to_string(data.n) + " samples");
    report.r_squared = r_squared(targets, pred.values);
    report.mse = mean_squared_error(targets, pred.values);
    metric = report.r_squared;
  }
  write_report_json(report, (fs::path(out_dir) / "report.json").string());

  const Embedding emb = export_embedding(model, data);
  write_embedding_csv(emb.coords, emb.labels.empty() ? truth_labels : emb.labels,
                      (fs::path(out_dir) / "embedding.csv").string());

  std::printf("wrote %s\n", (fs::path(out_dir) / "report.json").string().c_str());
  meta.write(0);
  std::printf("metric=%.9g\n", metric); // contract: machine-readable last line
  return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& png_path) {
  plot_csv(csv_path, png_path);
  std::printf("wrote %s\n", png_path.c_str());
  return 0;
}

int cmd_diagnose(const RunConfig& rc, const std::string& config_path) {
  RunMeta meta{"diagnose", rc.output_dir};
  meta.extra["config"] = config_path;
  meta.extra["seed"] = rc.training.seed;

  const PairedData data = obtain_data(rc);
  ModelSpecs specs = specs_for(rc, data);
  specs.source.bottleneck_size = rc.training.bottleneck_size;
  specs.target.bottleneck_size = rc.training.bottleneck_size;
  specs.head.hidden = rc.training.classifier_hidden;
  AdaptationModel model =
      build_adaptation_model(specs.source, specs.target, specs.head, rc.training.seed);

  const AlignmentDiagnostic pre = alignment_diagnostic(model, data.source, data.target_labeled);

  auto [rs, rt] = class_balance_resample(data.source, data.target_labeled, rc.training.seed);
  const StageReport rep =
      train_stage1_autoencoders(model, sort_by_class(rs), sort_by_class(rt), rc.training);
  const AlignmentDiagnostic post = alignment_diagnostic(model, data.source, data.target_labeled);

  auto line = [](const char* tag, const AlignmentDiagnostic& d) {
    std::printf("%-5s matched=%.6g mismatched=%.6g ratio=%.6g\n", tag, d.matched, d.mismatched,
                d.matched / d.mismatched);
  };
  std::printf("stage 1: %d epochs, %s\n", rep.epochs,
              rep.converged ? "converged" : "hit the epoch cap");
  line("pre:", pre);
  line("post:", post);

  json j;
  j["pre"] = {{"matched", pre.matched}, {"mismatched", pre.mismatched}};
  j["post"] = {{"matched", post.matched}, {"mismatched", post.mismatched}};
  j["stage1_epochs"] = rep.epochs;
  j["stage1_converged"] = rep.converged;
  fs::create_directories(rc.output_dir);
  std::ofstream f(fs::path(rc.output_dir) / "diagnose.json", std::ios::binary);
  f << j.dump(2) << "\n";

  const int code = rep.converged ? 0 : 2;
  meta.write(code);
  return code;
}

} // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env(); // SAEDA_THREADS

  CLI::App app{"saeda — simultaneous auto-encoder domain adaptation"};
  app.require_subcommand(1);

  std::string config_path, output_flag, task_flag, resume_flag, cws_grad_flag;
  double beta_flag = 0;
  uint64_t seed_flag = 0;
  bool skip3_flag = false;

  auto add_config_flags = [&](CLI::App* cmd, bool training_flags) {
    cmd->add_option("--config", config_path, "run config (JSON)")->required();
    cmd->add_option("--seed", seed_flag, "override the dataset and training seeds");
    cmd->add_option("--output", output_flag, "override output_dir");
    cmd->add_option("--task", task_flag, "override the task")
        ->check(CLI::IsMember({"classification", "regression"}));
    if (training_flags) {
      cmd->add_option("--beta", beta_flag, "override the cws-MMD weight");
      cmd->add_option("--cws-grad", cws_grad_flag,
                      "which encoders receive the cws-MMD gradient")
          ->check(CLI::IsMember({"both", "target-only"}));
    }
  };

  CLI::App* gen = app.add_subcommand("generate", "synthesize the paired dataset splits");
  add_config_flags(gen, false);

  CLI::App* train = app.add_subcommand("train", "run the three-stage pipeline");
  add_config_flags(train, true);
  train->add_option("--resume", resume_flag, "first stage to run, from checkpoints")
      ->check(CLI::IsMember({"stage1", "stage2", "stage3"}));
  train->add_flag("--skip-stage3", skip3_flag, "stop after stage 2 (ablation)");

  std::string model_dir, dataset_dir, truth_path, eval_out = ".";
  CLI::App* ev = app.add_subcommand("evaluate", "score a model against hidden truth");
  ev->add_option("model_dir", model_dir, "checkpoint directory")->required();
  ev->add_option("dataset_dir", dataset_dir, "dataset directory to score")->required();
  ev->add_option("truth_path", truth_path, "truth.json written by generate")->required();
  ev->add_option("--output", eval_out, "directory for report.json and CSVs");

  std::string plot_in, plot_out;
  CLI::App* pl = app.add_subcommand("plot", "render a result CSV to PNG");
  pl->add_option("csv", plot_in, "confusion.csv or embedding.csv")->required();
  pl->add_option("png", plot_out, "output image path")->required();

  CLI::App* diag = app.add_subcommand("diagnose", "class alignment before/after stage 1");
  add_config_flags(diag, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (pl->parsed()) return cmd_plot(plot_in, plot_out);
    if (ev->parsed()) return cmd_evaluate(model_dir, dataset_dir, truth_path, eval_out);

    CLI::App* active = gen->parsed() ? gen : train->parsed() ? train : diag;
    const auto given = [&](const char* name) {
      const CLI::Option* o = active->get_option_no_throw(name);
      return o && o->count() > 0;
    };
    RunConfig rc = load_run_config(config_path);
    if (given("--seed")) {
      rc.dataset.seed = seed_flag;
      rc.training.seed = seed_flag;
    }
    if (given("--output")) rc.output_dir = output_flag;
    if (given("--task")) {
      rc.task = task_flag;
      rc.dataset.task = task_flag == "regression" ? DatasetConfig::Task::regression
                                                  : DatasetConfig::Task::classification;
    }
    if (given("--beta")) {
      if (beta_flag < 0) fail(ErrCode::bad_config, "--beta must be >= 0");
      rc.training.loss.beta = (float)beta_flag;
    }
    if (given("--cws-grad")) rc.training.cws_grad = parse_cws_grad(cws_grad_flag, "--cws-grad");
    if (skip3_flag) rc.skip_stage3 = true;

    if (gen->parsed()) return cmd_generate(rc, config_path);
    if (train->parsed()) return cmd_train(rc, config_path, resume_flag);
    return cmd_diagnose(rc, config_path);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
