#pragma once
// Trainable layers built on the kernels: conv ("same" padding), dense,
// 2x2 max-pool, 2x2 nearest upsample, plus the Adam optimizer state each
// parameter block carries. Layers cache what their backward pass needs;
// backward OVERWRITES dW/db (the trainer steps immediately after each
// batch, so gradients never accumulate across batches).

#include <cstdint>
#include <vector>

#include "saeda/rng.hpp"
#include "saeda/tensor.hpp"

namespace saeda {

enum class Act { none, relu, sigmoid };

// ------------------------------------------------------------------ optimizer

struct AdamParams {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  std::vector<float> m, v;
  void init(size_t n) {
    m.assign(n, 0.f);
    v.assign(n, 0.f);
  }
};

// one update; t is the 1-based step count used for bias correction.
void adam_step(std::vector<float>& w, const std::vector<float>& g, AdamState& st,
               const AdamParams& ap, int64_t t);

// row-wise softmax with max-subtraction; logits [n][C] -> probs [n][C].
void softmax_rows(const float* logits, int n, int C, float* probs);

// --------------------------------------------------------------------- layers

struct Conv2DSame {
  int h = 0, w = 0, cin = 0, co = 0, kh = 0, kw = 0;
  Act act = Act::none;
  std::vector<float> W, b, dW, db;
  AdamState optW, optb;

  std::vector<float> x_cache; // input batch (needed for dW)
  std::vector<float> y;       // post-activation output
  std::vector<float> dx;      // input gradient, filled by backward
  int n_cache = 0;

  void init(int h_, int w_, int cin_, int co_, int kh_, int kw_, Act act_, rng::Rng& r);
  const std::vector<float>& forward(const float* x, int n);
  const std::vector<float>& backward(const float* dy, int n); // dy w.r.t. post-activation
  void step(const AdamParams& ap, int64_t t);
  size_t param_count() const { return W.size() + b.size(); }
};

struct Dense {
  int din = 0, dout = 0;
  Act act = Act::none;
  std::vector<float> W, b, dW, db;
  AdamState optW, optb;

  std::vector<float> x_cache;
  std::vector<float> y;
  std::vector<float> dx;
  int n_cache = 0;

  void init(int din_, int dout_, Act act_, rng::Rng& r);
  const std::vector<float>& forward(const float* x, int n);
  const std::vector<float>& backward(const float* dy, int n);
  void step(const AdamParams& ap, int64_t t);
  size_t param_count() const { return W.size() + b.size(); }
};

struct MaxPool2x2 {
  int h = 0, w = 0, c = 0; // input dims; h, w must be even
  std::vector<float> y;
  std::vector<int> argmax;
  std::vector<float> dx;
  int n_cache = 0;

  void init(int h_, int w_, int c_);
  const std::vector<float>& forward(const float* x, int n);
  const std::vector<float>& backward(const float* dy, int n);
};

struct Upsample2x2 {
  int h = 0, w = 0, c = 0; // input dims
  std::vector<float> y;
  std::vector<float> dx;
  int n_cache = 0;

  void init(int h_, int w_, int c_);
  const std::vector<float>& forward(const float* x, int n);
  const std::vector<float>& backward(const float* dy, int n);
};

} // namespace saeda
