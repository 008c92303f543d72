#pragma once
// Synthetic paired-modality data. Every class k owns a latent code z_k;
// each sample draws u = z_k + jitter and is rendered by one of two FIXED
// but different deterministic nonlinear renderers (different output shape,
// different mixing fields, different squashing nonlinearity), then gets
// additive Gaussian pixel noise and a clip to [0,1]. The class structure is
// therefore shared across modalities while the pixel spaces are unrelated —
// the setting the adaptation pipeline is built for.
//
// Generation is a pure function of the config: renderers are seeded from
// config.seed and every sample uses its own derived stream, so the per-
// sample loop can run in parallel without changing a single bit.

#include <cstdint>
#include <vector>

#include "saeda/dataset.hpp"

namespace saeda {

struct DatasetConfig {
  int num_classes = 4; // C
  int samples_per_class_source = 500;
  int samples_per_class_target_labeled = 10;
  int samples_per_class_target_unlabeled = 250;
  Shape3 source_shape = {32, 32, 1};
  Shape3 target_shape = {16, 24, 1};
  float noise_sigma_source = 0.05f; // additive Gaussian, pre-clip
  float noise_sigma_target = 0.15f;
  float jitter_sigma = 0.3f; // per-sample latent spread around the class code
  enum class Task { classification, regression };
  Task task = Task::classification;
  uint64_t seed = 0;
};

void validate(const DatasetConfig& cfg);

// Table of surface roughness (micrometers) per class slot in regression
// mode; index k belongs to sandpaper grit kRoughnessGrits[k].
extern const std::vector<float> kRoughnessSchedule;
extern const std::vector<int> kRoughnessGrits;

struct GroundTruth {
  std::vector<int> labels;    // always filled (class slots)
  std::vector<float> targets; // filled in regression mode
};

struct PairedData {
  Dataset source;
  Dataset target_labeled;
  Dataset target_unlabeled; // carries no labels; the truth travels separately
  GroundTruth truth;        // ground truth for target_unlabeled, evaluation only
};

PairedData generate_paired(const DatasetConfig& cfg);

} // namespace saeda
