#pragma once
// The network: symmetric convolutional auto-encoders (encoder: conv 16@2x2
// + pool, conv 32@3x3 + pool, dense -> bottleneck b with relu; decoder: the
// exact layer-for-layer mirror with 2x2 upsampling and a sigmoid output),
// the classifier / regressor head, and the bridged adaptation model that
// holds one auto-encoder per domain plus the shared head.
//
// The "bridge" of the single-graph construction is a parameterless,
// value-transparent marker: its only job is that one combined backward pass
// updates both auto-encoders. Toggling it never changes a forward output
// (tested), it only gates whether the trainer treats the two as one graph.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "saeda/layers.hpp"
#include "saeda/tensor.hpp"

namespace saeda {

// ------------------------------------------------------------------ specs

struct AutoencoderSpec {
  Shape3 input_shape;
  int bottleneck_size = 100;
  int conv1_filters = 16, conv1_kernel = 2;
  int conv2_filters = 32, conv2_kernel = 3;
  // fixed by contract: 2x2 max-pool / 2x2 upsample, relu bottleneck,
  // sigmoid output, decoder mirrors the encoder exactly.

  bool operator==(const AutoencoderSpec&) const = default;
};

// h, w >= 4 and divisible by 4 (two pool/upsample halvings must reproduce
// the input shape exactly); all sizes positive.
void validate(const AutoencoderSpec& spec);

struct HeadSpec {
  enum class Kind { softmax_classifier, linear_regressor };
  Kind kind = Kind::softmax_classifier;
  std::vector<int> hidden = {64}; // widths of the relu hidden layers
  int output_size = 0;            // C for the classifier, 1 for the regressor

  bool operator==(const HeadSpec&) const = default;
};

void validate(const HeadSpec& spec);

// ------------------------------------------------------------- autoencoder

struct Autoencoder {
  AutoencoderSpec spec;

  Conv2DSame enc_conv1;
  MaxPool2x2 pool1;
  Conv2DSame enc_conv2;
  MaxPool2x2 pool2;
  Dense enc_dense; // flatten is a no-op view (channel-last contiguous)

  Dense dec_dense;
  Upsample2x2 up1;
  Conv2DSame dec_conv1;
  Upsample2x2 up2;
  Conv2DSame dec_conv2;

  // encoder only; result is n x b.
  Mat encode(const float* x, int n);
  Mat encode(const Batch& batch);
  // decoder only; z is n x b.
  Batch decode(const Mat& z);
  // full pass keeping every layer cache for backward; returns the
  // reconstruction (n * input numel) and stores the bottleneck.
  const std::vector<float>& forward(const float* x, int n);
  const Mat& bottleneck() const { return bottleneck_; }

  // d_recon: gradient w.r.t. the reconstruction (post-sigmoid).
  // d_bneck_extra: optional additional gradient w.r.t. the bottleneck
  // (the class-wise MMD term); may be null.
  void backward(const float* d_recon, const float* d_bneck_extra, int n);
  void step(const AdamParams& ap, int64_t t);

  // fixed-order named parameter blocks (the save/load and freeze-check order).
  std::vector<std::pair<std::string, std::vector<float>*>> param_blocks();
  size_t param_count();

private:
  Mat bottleneck_;
};

Autoencoder build_autoencoder(const AutoencoderSpec& spec, uint64_t seed);

// -------------------------------------------------------------------- head

struct Head {
  HeadSpec spec;
  int input_size = 0;
  std::vector<Dense> layers; // hidden layers (relu) + output layer (linear)

  // raw outputs: logits for the classifier, scalar for the regressor.
  const std::vector<float>& forward(const float* z, int n);
  // classifier probabilities (softmax over logits).
  Mat probabilities(const float* z, int n);
  void backward(const float* d_out, int n);
  void step(const AdamParams& ap, int64_t t);
  // fresh random parameters and optimizer state (stage 2 re-initializes).
  void reinit(uint64_t seed);
  // zero the Adam moments but keep the weights (stage 3 continues from the
  // stage-2 head with a fresh optimizer).
  void reset_optimizer();

  std::vector<std::pair<std::string, std::vector<float>*>> param_blocks();
};

Head build_head(const HeadSpec& spec, int input_size, uint64_t seed);

// -------------------------------------------------------- adaptation model

struct AdaptationModel {
  Autoencoder source_ae;
  Autoencoder target_ae;
  Head head;
  bool bridge_installed = true; // value-transparent; see header comment
  bool stage1_done = false, stage2_done = false, stage3_done = false;
  uint64_t seed = 0; // build seed; stage-internal streams derive from it
  // regression label normalization, set once from the stage-2 training
  // targets and applied in reverse at prediction time (identity for
  // classification).
  float target_mean = 0.f, target_scale = 1.f;

  std::vector<std::pair<std::string, std::vector<float>*>> param_blocks();
  // flat copy of every parameter, block order — freeze checks diff this.
  std::vector<float> snapshot_params();
  // FNV-1a over the raw parameter bytes (checkpoint integrity hash).
  uint64_t param_hash();
};

AdaptationModel build_adaptation_model(const AutoencoderSpec& source_spec,
                                       const AutoencoderSpec& target_spec,
                                       const HeadSpec& head_spec, uint64_t seed);

// --------------------------------------------------------------- container

// Directory with manifest.json (specs, stage flags, block table, hash) and
// params.f32 (all blocks concatenated, little-endian float32). Round-trips
// are lossless; predictions before/after are bitwise identical.
void save_model(AdaptationModel& model, const std::string& dir);

// expected_kind: pass a HeadSpec::Kind to enforce the checkpoint's task
// (kind_mismatch otherwise); nullptr accepts either.
AdaptationModel load_model(const std::string& dir,
                           const HeadSpec::Kind* expected_kind = nullptr);

} // namespace saeda
