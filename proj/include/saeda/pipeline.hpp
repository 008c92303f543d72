#pragma once
// The staged training procedure:
//
//   prepare    class-balance the two labeled splits against each other
//              (upsample the smaller class-domain with replacement), sort
//              both by class, and emit class-aligned batch pairs.
//   stage 1    train both auto-encoders simultaneously: the source on its
//              reconstruction loss, the target on reconstruction plus the
//              class-wise MMD between the two bottleneck batches; one
//              combined step updates both parameter sets.
//   stage 2    freeze the auto-encoders, re-initialize the head, train it
//              on the frozen source bottleneck features.
//   stage 3    fine-tune the head (target encoder frozen) on the small
//              labeled target set.
//   predict    head applied to target-encoder features.
//
// Checkpoints land in <dir>/stage{1,2,3}/ using the model container format;
// every epoch appends one record to <dir>/training_log.jsonl. Runs are a
// pure function of (datasets, configs, seed): every shuffle, holdout split,
// and re-initialization draws from a stream derived from the config seed
// and the stage name, so a resumed run continues bit-for-bit where an
// uninterrupted one would have been.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "saeda/dataset.hpp"
#include "saeda/losses.hpp"
#include "saeda/model.hpp"

namespace saeda {

// ----------------------------------------------------------------- config

struct TrainingConfig {
  LossConfigT<float> loss;       // beta 0.25, probability clamp epsilon
  float learning_rate = 1e-4f;   // Adam, standard moment coefficients
  int batch_size = 32;           // must be >= C for class-aligned batching
  int max_epochs_per_stage = 200;
  float min_rel_improvement = 1e-4f; // convergence: relative loss improvement
  int patience = 5;                  // ... below threshold this many epochs
  uint64_t seed = 0;
  int bottleneck_size = 100;
  std::vector<int> classifier_hidden = {64}; // head widths before the output
  enum class CwsGrad { both, target_only };
  // whether the class-wise MMD gradient also flows into the source encoder
  // (single-graph training) or only into the target encoder (ablation).
  CwsGrad cws_grad = CwsGrad::both;
};

// num_classes: pass C when known (checks batch_size >= C), or 0 to skip.
void validate(const TrainingConfig& cfg, int num_classes);

struct EpochRecord {
  double loss = 0.0; // the stage objective this epoch (drives convergence)
  double source_bce = 0.0, target_total = 0.0;   // stage 1
  double target_recon = 0.0, target_cws = 0.0;   // stage 1: L_t's two parts
  double train_loss = 0.0, holdout_loss = 0.0;   // stages 2-3
  double seconds = 0.0;
};

struct StageReport {
  int stage = 0;
  int epochs = 0;
  double final_loss = 0.0;
  std::vector<double> loss_history; // length == epochs
  bool converged = false;
  double seconds = 0.0;
  std::vector<EpochRecord> records; // one per epoch, for the jsonl log
};

// ------------------------------------------------------- data preparation

// Per class, both outputs hold max(count_a, count_b) samples: the smaller
// side is upsampled uniformly with replacement (appended after its original
// rows), the larger side passes through untouched.
std::pair<Dataset, Dataset> class_balance_resample(const Dataset& a, const Dataset& b,
                                                   uint64_t seed);

// Stable reorder to non-decreasing labels (within-class order preserved).
Dataset sort_by_class(const Dataset& d);

struct BatchPair {
  Batch source, target;
  std::vector<int> source_labels, target_labels; // identical class multisets
  std::vector<int> source_rows, target_rows;     // rows in the input datasets
};

// Class-aligned batch pairs: within each class the two domains' samples are
// independently shuffled (seeded) and paired by position; each batch takes
// every class in proportion to its share, so both sides of every batch
// contain every class (the class-wise MMD precondition).
std::vector<BatchPair> make_aligned_batches(const Dataset& source, const Dataset& target,
                                            int batch_size, uint64_t seed);

// Bilinear resampling to a new grid (channel count must match); used by the
// source-only baseline to push target samples through the source encoder.
Batch resize_bilinear(const Batch& in, const Shape3& out_shape);

// ------------------------------------------------------------------ stages

StageReport train_stage1_autoencoders(AdaptationModel& model, const Dataset& source,
                                      const Dataset& target_labeled, const TrainingConfig& cfg);

StageReport train_stage2_classifier(AdaptationModel& model, const Dataset& source,
                                    const TrainingConfig& cfg);

StageReport train_stage3_finetune(AdaptationModel& model, const Dataset& target_labeled,
                                  const TrainingConfig& cfg);

struct Predictions {
  std::vector<int> labels;   // classification: argmax class per sample
  Mat probabilities;         // classification: n x C softmax rows
  std::vector<float> values; // regression: de-normalized estimates
};

// require_complete: demand all three stages (the normal contract); the
// skip-stage-3 ablation passes false to predict from the stage-2 head.
Predictions predict(AdaptationModel& model, const Dataset& data, bool require_complete = true);

// ------------------------------------------------------------ full runs

struct PipelineOptions {
  std::string checkpoint_dir; // empty: no checkpoints, no log
  // "", or "stage1"/"stage2"/"stage3": first stage to RUN; earlier stages
  // load from the checkpoint tree (hash-verified by the container loader).
  std::string resume;
  bool skip_stage3 = false; // ablation: predict straight from the stage-2 head
  int stop_after = 0;       // 1 or 2: end the run after that stage (0: full run)
};

struct PipelineResult {
  AdaptationModel model;
  StageReport stage1, stage2, stage3;
  Predictions predictions;
};

PipelineResult run_full_pipeline(const Dataset& source, const Dataset& target_labeled,
                                 const Dataset& target_unlabeled,
                                 const AutoencoderSpec& source_spec,
                                 const AutoencoderSpec& target_spec, const HeadSpec& head_spec,
                                 const TrainingConfig& cfg, const PipelineOptions& opt = {});

// The no-adaptation reference point: a source auto-encoder trained on
// reconstruction alone, a head trained on its frozen features, applied to
// target samples bilinearly resized to the source grid. Same seed
// derivations as the corresponding SAEDA components.
Predictions source_only_baseline(const Dataset& source, const Dataset& target_unlabeled,
                                 const AutoencoderSpec& source_spec, const HeadSpec& head_spec,
                                 const TrainingConfig& cfg);

} // namespace saeda
