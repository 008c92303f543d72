// profile_stage1 — wall-clock and quality probe for the full pipeline on the
// bundled default classification problem. Used to size epoch budgets: prints
// per-stage timing, per-epoch stage-1 seconds, the matched/mismatched
// alignment before and after stage 1, and final target accuracy for both
// SAEDA and the source-only baseline.
//
// usage: profile_stage1 [source_per_class=500] [stage1_epochs=10] [seed=0] [beta=0.25]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "saeda/datagen.hpp"
#include "saeda/eval.hpp"
#include "saeda/kernels.hpp"
#include "saeda/pipeline.hpp"

using namespace saeda;

namespace {
double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}
double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  int hit = 0;
  for (size_t i = 0; i < truth.size(); ++i) hit += pred[i] == truth[i];
  return (double)hit / truth.size();
}
} // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  DatasetConfig dc;
  dc.samples_per_class_source = argc > 1 ? std::atoi(argv[1]) : 500;
  const int stage1_epochs = argc > 2 ? std::atoi(argv[2]) : 10;
  dc.seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 0;

  TrainingConfig tc;
  tc.learning_rate = 1e-3f;
  tc.max_epochs_per_stage = stage1_epochs;
  tc.seed = dc.seed;
  tc.loss.beta = argc > 4 ? (float)std::atof(argv[4]) : 0.25f;

  double t0 = now_s();
  const PairedData data = generate_paired(dc);
  std::printf("generate: %.2fs (%d source, %d labeled, %d unlabeled)\n", now_s() - t0,
              data.source.n, data.target_labeled.n, data.target_unlabeled.n);

  AutoencoderSpec ss, ts;
  ss.input_shape = dc.source_shape;
  ts.input_shape = dc.target_shape;
  ss.bottleneck_size = ts.bottleneck_size = tc.bottleneck_size;
  HeadSpec hs;
  hs.output_size = dc.num_classes;
  hs.hidden = tc.classifier_hidden;

  AdaptationModel model = build_adaptation_model(ss, ts, hs, tc.seed);
  const AlignmentDiagnostic pre = alignment_diagnostic(model, data.source, data.target_labeled);

  t0 = now_s();
  auto [rs, rt] = class_balance_resample(data.source, data.target_labeled, tc.seed);
  const Dataset sorted_s = sort_by_class(rs), sorted_t = sort_by_class(rt);
  std::printf("resample+sort: %.2fs (%d per side)\n", now_s() - t0, sorted_s.n);

  const StageReport s1 = train_stage1_autoencoders(model, sorted_s, sorted_t, tc);
  std::printf("stage1: %d epochs in %.1fs (%.2fs/epoch), %s\n", s1.epochs, s1.seconds,
              s1.seconds / std::max(1, s1.epochs), s1.converged ? "converged" : "capped");
  for (int e = 0; e < s1.epochs; ++e) {
    const EpochRecord& r = s1.records[e];
    std::printf("  epoch %2d: loss=%.4f bce_s=%.4f recon_t=%.4f cws=%.5f (%.2fs)\n", e, r.loss,
                r.source_bce, r.target_recon, r.target_cws, r.seconds);
  }

  const AlignmentDiagnostic post = alignment_diagnostic(model, data.source, data.target_labeled);
  std::printf("alignment: pre matched=%.4g mismatched=%.4g ratio=%.3f | post matched=%.4g "
              "mismatched=%.4g ratio=%.3f\n",
              pre.matched, pre.mismatched, pre.matched / pre.mismatched, post.matched,
              post.mismatched, post.matched / post.mismatched);

  const StageReport s2 = train_stage2_classifier(model, sorted_s, tc);
  std::printf("stage2: %d epochs in %.1fs, final holdout loss %.4f\n", s2.epochs, s2.seconds,
              s2.final_loss);
  const StageReport s3 = train_stage3_finetune(model, data.target_labeled, tc);
  std::printf("stage3: %d epochs in %.1fs, final holdout loss %.4f\n", s3.epochs, s3.seconds,
              s3.final_loss);

  t0 = now_s();
  const Predictions p = predict(model, data.target_unlabeled);
  std::printf("predict: %.2fs\n", now_s() - t0);
  std::printf("SAEDA target accuracy: %.4f\n", accuracy(p.labels, data.truth.labels));

  t0 = now_s();
  const Predictions base = source_only_baseline(data.source, data.target_unlabeled, ss, hs, tc);
  std::printf("baseline (%.1fs) target accuracy: %.4f\n", now_s() - t0,
              accuracy(base.labels, data.truth.labels));
  return 0;
}
