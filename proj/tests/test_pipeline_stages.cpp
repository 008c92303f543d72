#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "saeda/datagen.hpp"
#include "saeda/errors.hpp"
#include "saeda/pipeline.hpp"

using namespace saeda;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Small paired-modality problem that trains in well under a second.
struct Rig {
  PairedData data;
  AutoencoderSpec sspec, tspec;
  HeadSpec hspec;
  TrainingConfig tcfg;
};

Rig make_rig(uint64_t seed = 0) {
  DatasetConfig d;
  d.num_classes = 3;
  d.samples_per_class_source = 12;
  d.samples_per_class_target_labeled = 4;
  d.samples_per_class_target_unlabeled = 6;
  d.source_shape = {8, 8, 1};
  d.target_shape = {4, 8, 1};
  d.noise_sigma_source = 0.05f;
  d.noise_sigma_target = 0.10f;
  d.seed = seed;

  Rig r;
  r.data = generate_paired(d);
  r.sspec.input_shape = d.source_shape;
  r.tspec.input_shape = d.target_shape;
  r.hspec.kind = HeadSpec::Kind::softmax_classifier;
  r.hspec.output_size = 3;
  r.tcfg.batch_size = 12;
  r.tcfg.learning_rate = 1e-3f; // tiny problem, larger steps keep tests quick
  r.tcfg.max_epochs_per_stage = 20;
  r.tcfg.bottleneck_size = 16;
  r.tcfg.classifier_hidden = {16};
  r.tcfg.seed = seed;
  return r;
}

AdaptationModel build_rig_model(const Rig& r) {
  AutoencoderSpec s = r.sspec, t = r.tspec;
  s.bottleneck_size = r.tcfg.bottleneck_size;
  t.bottleneck_size = r.tcfg.bottleneck_size;
  HeadSpec h = r.hspec;
  h.hidden = r.tcfg.classifier_hidden;
  return build_adaptation_model(s, t, h, r.tcfg.seed);
}

std::vector<float> snap(std::vector<std::pair<std::string, std::vector<float>*>> blocks) {
  std::vector<float> out;
  for (auto& [name, p] : blocks) out.insert(out.end(), p->begin(), p->end());
  return out;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  int hit = 0;
  for (size_t i = 0; i < truth.size(); ++i) hit += pred[i] == truth[i];
  return (double)hit / truth.size();
}

// argmax classification of a dataset through a given encoder + the head
double head_accuracy(Autoencoder& enc, Head& head, const Dataset& d) {
  int hit = 0;
  for (int i = 0; i < d.n; ++i) {
    const Mat z = enc.encode(d.sample(i), 1);
    const Mat p = head.probabilities(z.data.data(), 1);
    int best = 0;
    for (int k = 1; k < p.cols; ++k)
      if (p.at(0, k) > p.at(0, best)) best = k;
    hit += best == d.labels[i];
  }
  return (double)hit / d.n;
}

Dataset slice(const Dataset& d, int from, int to) {
  Dataset out = d;
  out.n = to - from;
  out.samples.assign(d.samples.begin() + (size_t)from * d.dim(),
                     d.samples.begin() + (size_t)to * d.dim());
  if (d.has_labels()) out.labels.assign(d.labels.begin() + from, d.labels.begin() + to);
  if (d.has_targets()) out.targets.assign(d.targets.begin() + from, d.targets.begin() + to);
  return out;
}

} // namespace

TEST_CASE("stage 1 trains both auto-encoders, leaves the head alone") {
  Rig r = make_rig();
  AdaptationModel m = build_rig_model(r);
  const auto head_before = snap(m.head.param_blocks());
  const auto src_before = snap(m.source_ae.param_blocks());

  const auto [rs, rt] = class_balance_resample(r.data.source, r.data.target_labeled, 1);
  const StageReport rep =
      train_stage1_autoencoders(m, sort_by_class(rs), sort_by_class(rt), r.tcfg);

  CHECK(rep.stage == 1);
  CHECK(rep.epochs > 0);
  CHECK(rep.epochs <= r.tcfg.max_epochs_per_stage);
  CHECK((int)rep.loss_history.size() == rep.epochs);
  CHECK((int)rep.records.size() == rep.epochs);
  CHECK(m.stage1_done);
  CHECK(snap(m.head.param_blocks()) == head_before);      // untouched
  CHECK_FALSE(snap(m.source_ae.param_blocks()) == src_before); // trained
  CHECK(rep.loss_history.front() > rep.loss_history.back());   // it learned

  // 5-epoch moving average of the total loss never increases (per-epoch
  // noise is allowed, a trend reversal is not)
  const auto& h = rep.loss_history;
  if (h.size() >= 6) {
    for (size_t i = 0; i + 5 < h.size(); ++i) {
      double w0 = 0, w1 = 0;
      for (int j = 0; j < 5; ++j) {
        w0 += h[i + j];
        w1 += h[i + 1 + j];
      }
      CHECK(w1 <= w0 * 1.001);
    }
  }

  SUBCASE("a completed stage refuses to run again") {
    CHECK_THROWS_AS(train_stage1_autoencoders(m, sort_by_class(rs), sort_by_class(rt), r.tcfg),
                    Error);
  }
}

TEST_CASE("stage order is enforced in both directions") {
  Rig r = make_rig();
  AdaptationModel m = build_rig_model(r);
  auto expect_stage_order = [](auto&& fn) {
    try {
      fn();
      FAIL("expected stage_order error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::stage_order);
    }
  };
  expect_stage_order([&] { train_stage2_classifier(m, r.data.source, r.tcfg); });
  expect_stage_order([&] { train_stage3_finetune(m, r.data.target_labeled, r.tcfg); });
  expect_stage_order([&] { predict(m, r.data.target_unlabeled); });

  r.tcfg.max_epochs_per_stage = 0;
  const StageReport rep = train_stage1_autoencoders(m, sort_by_class(r.data.source),
                                                    sort_by_class(r.data.target_labeled), r.tcfg);
  CHECK(rep.epochs == 0);
  CHECK_FALSE(rep.converged);
  CHECK(rep.loss_history.empty());
  expect_stage_order([&] { train_stage3_finetune(m, r.data.target_labeled, r.tcfg); });
}

TEST_CASE("stages 2 and 3 freeze the auto-encoders bitwise") {
  Rig r = make_rig();
  r.tcfg.max_epochs_per_stage = 6;
  AdaptationModel m = build_rig_model(r);
  const auto [rs, rt] = class_balance_resample(r.data.source, r.data.target_labeled, 1);
  const Dataset ss = sort_by_class(rs), tt = sort_by_class(rt);
  train_stage1_autoencoders(m, ss, tt, r.tcfg);

  const auto src_frozen = snap(m.source_ae.param_blocks());
  const auto tgt_frozen = snap(m.target_ae.param_blocks());
  const auto head_before = snap(m.head.param_blocks());

  const StageReport s2 = train_stage2_classifier(m, ss, r.tcfg);
  CHECK(snap(m.source_ae.param_blocks()) == src_frozen);
  CHECK(snap(m.target_ae.param_blocks()) == tgt_frozen);
  CHECK_FALSE(snap(m.head.param_blocks()) == head_before); // re-initialized + trained
  CHECK(s2.stage == 2);
  CHECK(m.stage2_done);

  const StageReport s3 = train_stage3_finetune(m, r.data.target_labeled, r.tcfg);
  CHECK(snap(m.source_ae.param_blocks()) == src_frozen);
  CHECK(snap(m.target_ae.param_blocks()) == tgt_frozen);
  CHECK(s3.stage == 3);
  CHECK(m.stage3_done);

  SUBCASE("predictions expose sane probabilities") {
    const Predictions p = predict(m, r.data.target_unlabeled);
    REQUIRE((int)p.labels.size() == r.data.target_unlabeled.n);
    for (int i = 0; i < p.probabilities.rows; ++i) {
      double sum = 0;
      for (int k = 0; k < p.probabilities.cols; ++k) sum += p.probabilities.at(i, k);
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("stage 3 demands every class among the labeled target samples") {
  Rig r = make_rig();
  r.tcfg.max_epochs_per_stage = 1;
  AdaptationModel m = build_rig_model(r);
  const auto [rs, rt] = class_balance_resample(r.data.source, r.data.target_labeled, 1);
  train_stage1_autoencoders(m, sort_by_class(rs), sort_by_class(rt), r.tcfg);
  train_stage2_classifier(m, sort_by_class(rs), r.tcfg);

  Dataset crippled = sort_by_class(r.data.target_labeled);
  crippled = slice(crippled, 4, crippled.n); // drops every class-0 sample
  try {
    train_stage3_finetune(m, crippled, r.tcfg);
    FAIL("expected missing_class");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::missing_class);
  }
}

TEST_CASE("beta=0 with identical datasets degenerates to two independent trainings") {
  Rig r = make_rig();
  r.tcfg.loss.beta = 0.f;
  r.tcfg.max_epochs_per_stage = 30;
  // same data on both sides; specs already share the source shape
  r.tspec = r.sspec;
  AdaptationModel m = build_rig_model(r);
  Dataset as_target = r.data.source;
  as_target.split = SplitTag::target_labeled;

  const Dataset ss = sort_by_class(r.data.source), tt = sort_by_class(as_target);
  const StageReport rep = train_stage1_autoencoders(m, ss, tt, r.tcfg);

  const EpochRecord& last = rep.records.back();
  for (const EpochRecord& rec : rep.records)
    CHECK(rec.target_total == rec.target_recon); // beta = 0, exactly
  // two same-topology auto-encoders on the same data end up near each other
  CHECK(std::abs(last.source_bce - last.target_recon) / last.target_recon < 0.1);
}

TEST_CASE("stage 1 pulls class-wise MMD down (seed 0)") {
  Rig r = make_rig(0);
  r.tcfg.max_epochs_per_stage = 12;
  AdaptationModel m = build_rig_model(r);
  const auto [rs, rt] = class_balance_resample(r.data.source, r.data.target_labeled, 1);
  const Dataset ss = sort_by_class(rs), tt = sort_by_class(rt);

  auto cws_now = [&] {
    const Mat fs = m.source_ae.encode(ss.samples.data(), ss.n);
    const Mat ft = m.target_ae.encode(tt.samples.data(), tt.n);
    return cws_mmd_loss(fs.data.data(), ss.labels, ft.data.data(), tt.labels, fs.cols, 3);
  };
  const float before = cws_now();
  train_stage1_autoencoders(m, ss, tt, r.tcfg);
  const float after = cws_now();
  CHECK(after < before);
}

TEST_CASE("an exploding run aborts with a divergence error") {
  Rig r = make_rig();
  r.tcfg.learning_rate = 1e15f;
  r.tcfg.max_epochs_per_stage = 8;
  AdaptationModel m = build_rig_model(r);
  const auto [rs, rt] = class_balance_resample(r.data.source, r.data.target_labeled, 1);
  try {
    train_stage1_autoencoders(m, sort_by_class(rs), sort_by_class(rt), r.tcfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::divergence);
  }
}

TEST_CASE("stage 2 separates linearly separable bottlenecks (>= 99% train accuracy)") {
  // zero noise + zero jitter: every class collapses to one tensor, so even
  // the untrained encoder maps each class to a single feature point.
  DatasetConfig d;
  d.num_classes = 3;
  d.samples_per_class_source = 10;
  d.samples_per_class_target_labeled = 2;
  d.samples_per_class_target_unlabeled = 2;
  d.source_shape = {8, 8, 1};
  d.target_shape = {4, 8, 1};
  d.noise_sigma_source = 0.f;
  d.noise_sigma_target = 0.f;
  d.jitter_sigma = 0.f;
  d.seed = 3;
  const PairedData data = generate_paired(d);

  Rig r = make_rig();
  AdaptationModel m = build_rig_model(r);
  TrainingConfig cfg = r.tcfg;
  cfg.max_epochs_per_stage = 0;
  train_stage1_autoencoders(m, sort_by_class(data.source), sort_by_class(data.target_labeled),
                            cfg); // flag only: the head trains on raw random features
  cfg.max_epochs_per_stage = 200;
  train_stage2_classifier(m, sort_by_class(data.source), cfg);
  CHECK(head_accuracy(m.source_ae, m.head, data.source) >= 0.99);
}

TEST_CASE("stage 3 on a source-identical target does not lose accuracy") {
  Rig r = make_rig(5);
  r.tspec = r.sspec;
  r.tcfg.max_epochs_per_stage = 40;
  AdaptationModel m = build_rig_model(r);

  Dataset as_target = r.data.source;
  as_target.split = SplitTag::target_labeled;
  const auto [rs, rt] = class_balance_resample(r.data.source, as_target, 1);
  const Dataset ss = sort_by_class(rs), tt = sort_by_class(rt);
  train_stage1_autoencoders(m, ss, tt, r.tcfg);
  train_stage2_classifier(m, ss, r.tcfg);
  const double acc2 = head_accuracy(m.source_ae, m.head, r.data.source);

  train_stage3_finetune(m, as_target, r.tcfg);
  Dataset eval = r.data.source;
  eval.split = SplitTag::target_unlabeled;
  const Predictions p = predict(m, eval);
  const double acc3 = accuracy(p.labels, r.data.source.labels);
  CHECK(acc3 >= acc2 - 0.02);
}

TEST_CASE("full pipeline: checkpoints, log, resume equals uninterrupted run") {
  TempDir tmp("saeda_pipeline_resume");
  Rig r = make_rig(1);
  r.tcfg.max_epochs_per_stage = 5;

  PipelineOptions full;
  full.checkpoint_dir = (tmp.path / "full").string();
  PipelineResult a = run_full_pipeline(r.data.source, r.data.target_labeled,
                                       r.data.target_unlabeled, r.sspec, r.tspec, r.hspec,
                                       r.tcfg, full);

  // interrupted after stage 1, then resumed at stage 2
  PipelineOptions part1;
  part1.checkpoint_dir = (tmp.path / "part").string();
  part1.stop_after = 1;
  run_full_pipeline(r.data.source, r.data.target_labeled, r.data.target_unlabeled, r.sspec,
                    r.tspec, r.hspec, r.tcfg, part1);
  PipelineOptions part2;
  part2.checkpoint_dir = part1.checkpoint_dir;
  part2.resume = "stage2";
  PipelineResult b = run_full_pipeline(r.data.source, r.data.target_labeled,
                                       r.data.target_unlabeled, r.sspec, r.tspec, r.hspec,
                                       r.tcfg, part2);

  CHECK(a.model.param_hash() == b.model.param_hash());
  CHECK(a.predictions.labels == b.predictions.labels);
  CHECK(a.predictions.probabilities.data == b.predictions.probabilities.data); // bitwise
  CHECK(a.stage2.loss_history == b.stage2.loss_history);
  CHECK(a.stage3.loss_history == b.stage3.loss_history);

  // the log trees agree record-for-record once wall-clock noise is dropped
  auto read_log = [](const fs::path& p) {
    std::vector<json> lines;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
      json j = json::parse(line);
      j.erase("seconds");
      lines.push_back(j);
    }
    return lines;
  };
  const auto la = read_log(fs::path(full.checkpoint_dir) / "training_log.jsonl");
  const auto lb = read_log(fs::path(part1.checkpoint_dir) / "training_log.jsonl");
  REQUIRE_FALSE(la.empty());
  CHECK(la == lb);
  CHECK((int)la.size() == a.stage1.epochs + a.stage2.epochs + a.stage3.epochs);
  CHECK(la.front().contains("stage"));
  CHECK(la.front().contains("parts"));

  // all three checkpoints exist and the final one reloads losslessly
  for (int s : {1, 2, 3})
    CHECK(fs::exists(fs::path(full.checkpoint_dir) / ("stage" + std::to_string(s)) /
                     "manifest.json"));
  AdaptationModel re = load_model((fs::path(full.checkpoint_dir) / "stage3").string());
  CHECK(re.param_hash() == a.model.param_hash());

  SUBCASE("prediction is invariant to batch partitioning") {
    const Dataset& u = r.data.target_unlabeled;
    Predictions whole = predict(a.model, u);
    const Dataset first = slice(u, 0, u.n / 2), second = slice(u, u.n / 2, u.n);
    Predictions p1 = predict(a.model, first), p2 = predict(a.model, second);
    std::vector<float> merged = p1.probabilities.data;
    merged.insert(merged.end(), p2.probabilities.data.begin(), p2.probabilities.data.end());
    CHECK(whole.probabilities.data == merged);
  }

  SUBCASE("resume without a checkpoint tree is rejected") {
    PipelineOptions bad;
    bad.resume = "stage2";
    CHECK_THROWS_AS(run_full_pipeline(r.data.source, r.data.target_labeled,
                                      r.data.target_unlabeled, r.sspec, r.tspec, r.hspec,
                                      r.tcfg, bad),
                    Error);
  }
}

TEST_CASE("skip-stage-3 ablation predicts from the stage-2 head") {
  Rig r = make_rig(2);
  r.tcfg.max_epochs_per_stage = 4;
  PipelineOptions opt;
  opt.skip_stage3 = true;
  const PipelineResult res =
      run_full_pipeline(r.data.source, r.data.target_labeled, r.data.target_unlabeled, r.sspec,
                        r.tspec, r.hspec, r.tcfg, opt);
  CHECK(res.stage3.epochs == 0);
  CHECK_FALSE(res.model.stage3_done);
  CHECK((int)res.predictions.labels.size() == r.data.target_unlabeled.n);
}

TEST_CASE("source-only baseline produces in-range predictions") {
  Rig r = make_rig(4);
  r.tcfg.max_epochs_per_stage = 4;
  const Predictions p =
      source_only_baseline(r.data.source, r.data.target_unlabeled, r.sspec, r.hspec, r.tcfg);
  REQUIRE((int)p.labels.size() == r.data.target_unlabeled.n);
  for (int l : p.labels) {
    CHECK(l >= 0);
    CHECK(l < 3);
  }
}

TEST_CASE("regression pipeline runs end to end and de-normalizes predictions") {
  DatasetConfig d;
  d.task = DatasetConfig::Task::regression;
  d.num_classes = 3;
  d.samples_per_class_source = 12;
  d.samples_per_class_target_labeled = 4;
  d.samples_per_class_target_unlabeled = 5;
  d.source_shape = {8, 8, 1};
  d.target_shape = {4, 8, 1};
  d.noise_sigma_source = 0.05f;
  d.noise_sigma_target = 0.10f;
  d.seed = 9;
  const PairedData data = generate_paired(d);

  Rig r = make_rig();
  r.hspec.kind = HeadSpec::Kind::linear_regressor;
  r.hspec.output_size = 1;
  r.tcfg.max_epochs_per_stage = 25;
  const PipelineResult res = run_full_pipeline(data.source, data.target_labeled,
                                               data.target_unlabeled, r.sspec, r.tspec, r.hspec,
                                               r.tcfg, {});
  REQUIRE((int)res.predictions.values.size() == data.target_unlabeled.n);
  CHECK(res.predictions.labels.empty());
  CHECK(res.model.target_scale > 1.f); // micrometer scale, not the unit ball
  // after de-normalization the values live near the roughness schedule
  for (float v : res.predictions.values) {
    CHECK(v > -50.f);
    CHECK(v < 150.f);
  }
}
