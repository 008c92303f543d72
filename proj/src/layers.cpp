#include "saeda/layers.hpp"

#include <cmath>
#include <cstring>

#include "saeda/kernels.hpp"

namespace saeda {

// ------------------------------------------------------------------ optimizer

void adam_step(std::vector<float>& w, const std::vector<float>& g, AdamState& st,
               const AdamParams& ap, int64_t t) {
  const float c1 = (float)(1.0 / (1.0 - std::pow((double)ap.beta1, (double)t)));
  const float c2 = (float)(1.0 / (1.0 - std::pow((double)ap.beta2, (double)t)));
  for (size_t i = 0; i < w.size(); ++i) {
    st.m[i] = ap.beta1 * st.m[i] + (1.f - ap.beta1) * g[i];
    st.v[i] = ap.beta2 * st.v[i] + (1.f - ap.beta2) * g[i] * g[i];
    const float mhat = st.m[i] * c1;
    const float vhat = st.v[i] * c2;
    w[i] -= ap.lr * mhat / (std::sqrt(vhat) + ap.eps);
  }
}

void softmax_rows(const float* logits, int n, int C, float* probs) {
  for (int i = 0; i < n; ++i) {
    const float* z = logits + (size_t)i * C;
    float* p = probs + (size_t)i * C;
    float mx = z[0];
    for (int k = 1; k < C; ++k) mx = std::max(mx, z[k]);
    float sum = 0.f;
    for (int k = 0; k < C; ++k) {
      p[k] = std::exp(z[k] - mx);
      sum += p[k];
    }
    const float inv = 1.f / sum;
    for (int k = 0; k < C; ++k) p[k] *= inv;
  }
}

// ---------------------------------------------------------------- activations

namespace {

void apply_act(Act act, std::vector<float>& v) {
  switch (act) {
    case Act::none:
      return;
    case Act::relu:
      for (auto& x : v) x = x > 0.f ? x : 0.f;
      return;
    case Act::sigmoid:
      // clamped a hair inside (0,1): float sigmoid saturates to exactly
      // 0/1 for |x| > ~17, which would break the strict-open-interval
      // output contract and zero the BCE gradient entirely.
      for (auto& x : v) {
        x = 1.f / (1.f + std::exp(-x));
        x = std::min(std::max(x, 1e-6f), 1.f - 1e-6f);
      }
      return;
  }
}

// dy (w.r.t. post-activation) -> gradient w.r.t. pre-activation, using the
// cached post-activation values.
void act_backward(Act act, const float* dy, const std::vector<float>& post, float* dpre) {
  switch (act) {
    case Act::none:
      std::memcpy(dpre, dy, post.size() * sizeof(float));
      return;
    case Act::relu:
      for (size_t i = 0; i < post.size(); ++i) dpre[i] = post[i] > 0.f ? dy[i] : 0.f;
      return;
    case Act::sigmoid:
      for (size_t i = 0; i < post.size(); ++i) dpre[i] = dy[i] * post[i] * (1.f - post[i]);
      return;
  }
}

} // namespace

// ----------------------------------------------------------------- Conv2DSame

void Conv2DSame::init(int h_, int w_, int cin_, int co_, int kh_, int kw_, Act act_,
                      rng::Rng& r) {
  h = h_;
  w = w_;
  cin = cin_;
  co = co_;
  kh = kh_;
  kw = kw_;
  act = act_;
  W.assign((size_t)kh * kw * cin * co, 0.f);
  b.assign(co, 0.f);
  rng::glorot_uniform(r, cin * kh * kw, co * kh * kw, W.data(), W.size());
  dW.assign(W.size(), 0.f);
  db.assign(b.size(), 0.f);
  optW.init(W.size());
  optb.init(b.size());
}

const std::vector<float>& Conv2DSame::forward(const float* x, int n) {
  n_cache = n;
  x_cache.assign(x, x + (size_t)n * h * w * cin);
  y.resize((size_t)n * h * w * co);
  kernels::conv2d_forward(x, n, h, w, cin, W.data(), b.data(), co, kh, kw, y.data());
  apply_act(act, y);
  return y;
}

const std::vector<float>& Conv2DSame::backward(const float* dy, int n) {
  std::vector<float> dpre(y.size());
  act_backward(act, dy, y, dpre.data());
  kernels::conv2d_backward_weights(x_cache.data(), dpre.data(), n, h, w, cin, co, kh, kw,
                                   dW.data(), db.data());
  dx.resize((size_t)n * h * w * cin);
  kernels::conv2d_backward_data(dpre.data(), n, h, w, cin, W.data(), co, kh, kw, dx.data());
  return dx;
}

void Conv2DSame::step(const AdamParams& ap, int64_t t) {
  adam_step(W, dW, optW, ap, t);
  adam_step(b, db, optb, ap, t);
}

// ---------------------------------------------------------------------- Dense

void Dense::init(int din_, int dout_, Act act_, rng::Rng& r) {
  din = din_;
  dout = dout_;
  act = act_;
  W.assign((size_t)din * dout, 0.f);
  b.assign(dout, 0.f);
  rng::glorot_uniform(r, din, dout, W.data(), W.size());
  dW.assign(W.size(), 0.f);
  db.assign(b.size(), 0.f);
  optW.init(W.size());
  optb.init(b.size());
}

const std::vector<float>& Dense::forward(const float* x, int n) {
  n_cache = n;
  x_cache.assign(x, x + (size_t)n * din);
  y.resize((size_t)n * dout);
  kernels::dense_forward(x, n, din, W.data(), b.data(), dout, y.data());
  apply_act(act, y);
  return y;
}

const std::vector<float>& Dense::backward(const float* dy, int n) {
  std::vector<float> dpre(y.size());
  act_backward(act, dy, y, dpre.data());
  kernels::dense_backward_weights(x_cache.data(), dpre.data(), n, din, dout, dW.data(),
                                  db.data());
  dx.resize((size_t)n * din);
  kernels::dense_backward_data(dpre.data(), n, din, W.data(), dout, dx.data());
  return dx;
}

void Dense::step(const AdamParams& ap, int64_t t) {
  adam_step(W, dW, optW, ap, t);
  adam_step(b, db, optb, ap, t);
}

// ----------------------------------------------------------------- MaxPool2x2

void MaxPool2x2::init(int h_, int w_, int c_) {
  if (h_ % 2 || w_ % 2) fail(ErrCode::bad_config, "maxpool2x2: input dims must be even");
  h = h_;
  w = w_;
  c = c_;
}

const std::vector<float>& MaxPool2x2::forward(const float* x, int n) {
  n_cache = n;
  y.resize((size_t)n * (h / 2) * (w / 2) * c);
  argmax.resize(y.size());
  kernels::maxpool2x2_forward(x, n, h, w, c, y.data(), argmax.data());
  return y;
}

const std::vector<float>& MaxPool2x2::backward(const float* dy, int n) {
  dx.resize((size_t)n * h * w * c);
  kernels::maxpool2x2_backward(dy, n, h, w, c, argmax.data(), dx.data());
  return dx;
}

// ---------------------------------------------------------------- Upsample2x2

void Upsample2x2::init(int h_, int w_, int c_) {
  h = h_;
  w = w_;
  c = c_;
}

const std::vector<float>& Upsample2x2::forward(const float* x, int n) {
  n_cache = n;
  y.resize((size_t)n * 4 * h * w * c);
  kernels::upsample2x2_forward(x, n, h, w, c, y.data());
  return y;
}

const std::vector<float>& Upsample2x2::backward(const float* dy, int n) {
  dx.resize((size_t)n * h * w * c);
  kernels::upsample2x2_backward(dy, n, h, w, c, dx.data());
  return dx;
}

} // namespace saeda
