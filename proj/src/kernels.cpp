#include "saeda/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace saeda::kernels {

// ===================================================================== control

namespace {
Mode g_mode = Mode::auto_pick;
bool g_env_done = false;
} // namespace

void set_mode(Mode m) { g_mode = m; }
Mode mode() { return g_mode; }

void configure_threads_from_env() {
  if (g_env_done) return;
  g_env_done = true;
#ifdef _OPENMP
  if (const char* s = std::getenv("SAEDA_THREADS")) {
    int t = std::atoi(s);
    if (t > 0) omp_set_num_threads(t);
  }
#endif
}

int thread_count() {
  configure_threads_from_env();
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {
bool use_omp() {
  if (g_mode == Mode::serial_only) return false;
  if (g_mode == Mode::omp_only) return true;
  return thread_count() > 1;
}
} // namespace

// ====================================================================== im2col

void im2col_same(const float* x, int h, int w, int cin, int kh, int kw, float* col) {
  const int pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  const int K = kh * kw * cin;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      float* out = col + (size_t)(y * w + xx) * K;
      for (int ky = 0; ky < kh; ++ky) {
        int sy = y + ky - pt;
        for (int kx = 0; kx < kw; ++kx) {
          int sx = xx + kx - pl;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
            for (int ci = 0; ci < cin; ++ci) *out++ = 0.f;
          } else {
            const float* src = x + ((size_t)sy * w + sx) * cin;
            for (int ci = 0; ci < cin; ++ci) *out++ = src[ci];
          }
        }
      }
    }
  }
}

// ============================================================== shared bodies
// Each kernel's arithmetic lives in one *_body function; the serial and omp
// namespaces differ only in whether the outer loop over disjoint outputs
// carries an OpenMP pragma. That is what makes the two bitwise identical.

namespace {

inline void matmul_row(const float* A_row, const float* B, float* C_row, int K, int N) {
  for (int j = 0; j < N; ++j) C_row[j] = 0.f;
  for (int k = 0; k < K; ++k) {
    const float a = A_row[k];
    const float* b = B + (size_t)k * N;
    for (int j = 0; j < N; ++j) C_row[j] += a * b[j];
  }
}

// one sample of conv forward: im2col into scratch, then (HW x K) * (K x co)
inline void conv2d_forward_one(const float* xs, int h, int w, int cin, const float* W,
                               const float* bias, int co, int kh, int kw, float* ys,
                               float* scratch) {
  const int K = kh * kw * cin, HW = h * w;
  im2col_same(xs, h, w, cin, kh, kw, scratch);
  for (int r = 0; r < HW; ++r) {
    float* out = ys + (size_t)r * co;
    matmul_row(scratch + (size_t)r * K, W, out, K, co);
    for (int j = 0; j < co; ++j) out[j] += bias[j];
  }
}

// one sample of conv backward-data: dcol = dy * W^T, then col2im-add
inline void conv2d_backward_data_one(const float* dys, int h, int w, int cin, const float* Wt,
                                     int co, int kh, int kw, float* dxs, float* scratch) {
  const int K = kh * kw * cin, HW = h * w;
  const int pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  // scratch = dcol [HW][K]; Wt is W transposed, [co][K]
  for (int r = 0; r < HW; ++r) matmul_row(dys + (size_t)r * co, Wt, scratch + (size_t)r * K, co, K);
  std::memset(dxs, 0, sizeof(float) * (size_t)HW * cin);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const float* dcol = scratch + (size_t)(y * w + xx) * K;
      for (int ky = 0; ky < kh; ++ky) {
        int sy = y + ky - pt;
        if (sy < 0 || sy >= h) {
          dcol += kw * cin;
          continue;
        }
        for (int kx = 0; kx < kw; ++kx) {
          int sx = xx + kx - pl;
          if (sx < 0 || sx >= w) {
            dcol += cin;
            continue;
          }
          float* dst = dxs + ((size_t)sy * w + sx) * cin;
          for (int ci = 0; ci < cin; ++ci) dst[ci] += *dcol++;
        }
      }
    }
  }
}

// weight-gradient row for one (ky,kx,ci) triple, summed serially over the
// batch and spatial positions — the parallel loop is over these rows, so
// each dW element is produced by exactly one fixed-order summation.
inline void conv2d_backward_weights_row(const float* x, const float* dy, int n, int h, int w,
                                        int cin, int co, int kh, int kw, int krow, float* dW_row) {
  const int pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  const int ci = krow % cin, kx = (krow / cin) % kw, ky = krow / (cin * kw);
  for (int j = 0; j < co; ++j) dW_row[j] = 0.f;
  for (int i = 0; i < n; ++i) {
    const float* xs = x + (size_t)i * h * w * cin;
    const float* dys = dy + (size_t)i * h * w * co;
    for (int y = 0; y < h; ++y) {
      int sy = y + ky - pt;
      if (sy < 0 || sy >= h) continue;
      for (int xx = 0; xx < w; ++xx) {
        int sx = xx + kx - pl;
        if (sx < 0 || sx >= w) continue;
        const float xv = xs[((size_t)sy * w + sx) * cin + ci];
        const float* dyr = dys + ((size_t)y * w + xx) * co;
        for (int j = 0; j < co; ++j) dW_row[j] += xv * dyr[j];
      }
    }
  }
}

inline void conv2d_bias_grad(const float* dy, int n, int hw, int co, float* dbias) {
  for (int j = 0; j < co; ++j) dbias[j] = 0.f;
  for (size_t r = 0; r < (size_t)n * hw; ++r) {
    const float* row = dy + r * co;
    for (int j = 0; j < co; ++j) dbias[j] += row[j];
  }
}

inline void maxpool_one(const float* xs, int h, int w, int c, float* ys, int* am) {
  const int oh = h / 2, ow = w / 2;
  for (int y = 0; y < oh; ++y) {
    for (int xx = 0; xx < ow; ++xx) {
      for (int ch = 0; ch < c; ++ch) {
        int best = ((2 * y) * w + 2 * xx) * c + ch;
        float bv = xs[best];
        // fixed scan order; strictly-greater keeps the first maximum
        const int cand[3] = {((2 * y) * w + 2 * xx + 1) * c + ch,
                             ((2 * y + 1) * w + 2 * xx) * c + ch,
                             ((2 * y + 1) * w + 2 * xx + 1) * c + ch};
        for (int t = 0; t < 3; ++t)
          if (xs[cand[t]] > bv) {
            bv = xs[cand[t]];
            best = cand[t];
          }
        ys[((size_t)y * ow + xx) * c + ch] = bv;
        am[((size_t)y * ow + xx) * c + ch] = best;
      }
    }
  }
}

inline void upsample_one(const float* xs, int h, int w, int c, float* ys) {
  const int ow = 2 * w;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const float* src = xs + ((size_t)y * w + xx) * c;
      for (int dy2 = 0; dy2 < 2; ++dy2)
        for (int dx2 = 0; dx2 < 2; ++dx2) {
          float* dst = ys + ((size_t)(2 * y + dy2) * ow + (2 * xx + dx2)) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
        }
    }
  }
}

inline void upsample_back_one(const float* dys, int h, int w, int c, float* dxs) {
  const int ow = 2 * w;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      float* dst = dxs + ((size_t)y * w + xx) * c;
      for (int ch = 0; ch < c; ++ch) dst[ch] = 0.f;
      // fixed accumulation order over the 2x2 block
      for (int dy2 = 0; dy2 < 2; ++dy2)
        for (int dx2 = 0; dx2 < 2; ++dx2) {
          const float* src = dys + ((size_t)(2 * y + dy2) * ow + (2 * xx + dx2)) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
    }
  }
}

inline void dense_backward_data_one(const float* dyr, const float* W, int din, int dout,
                                    float* dxr) {
  for (int k = 0; k < din; ++k) {
    const float* wr = W + (size_t)k * dout;
    float acc = 0.f;
    for (int o = 0; o < dout; ++o) acc += dyr[o] * wr[o];
    dxr[k] = acc;
  }
}

inline void dense_backward_weights_row(const float* x, const float* dy, int n, int din, int dout,
                                       int k, float* dW_row) {
  for (int o = 0; o < dout; ++o) dW_row[o] = 0.f;
  for (int i = 0; i < n; ++i) {
    const float xv = x[(size_t)i * din + k];
    const float* dyr = dy + (size_t)i * dout;
    for (int o = 0; o < dout; ++o) dW_row[o] += xv * dyr[o];
  }
}

inline void transpose(const float* W, int K, int co, std::vector<float>& Wt) {
  Wt.resize((size_t)K * co);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < co; ++j) Wt[(size_t)j * K + k] = W[(size_t)k * co + j];
}

} // namespace

// ====================================================================== serial

namespace serial {

void matmul(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) matmul_row(A + (size_t)i * K, B, C + (size_t)i * N, K, N);
}

void conv2d_forward(const float* x, int n, int h, int w, int cin, const float* W,
                    const float* bias, int co, int kh, int kw, float* y) {
  std::vector<float> scratch((size_t)h * w * kh * kw * cin);
  for (int i = 0; i < n; ++i)
    conv2d_forward_one(x + (size_t)i * h * w * cin, h, w, cin, W, bias, co, kh, kw,
                       y + (size_t)i * h * w * co, scratch.data());
}

void conv2d_backward_data(const float* dy, int n, int h, int w, int cin, const float* W, int co,
                          int kh, int kw, float* dx) {
  std::vector<float> Wt;
  transpose(W, kh * kw * cin, co, Wt);
  std::vector<float> scratch((size_t)h * w * kh * kw * cin);
  for (int i = 0; i < n; ++i)
    conv2d_backward_data_one(dy + (size_t)i * h * w * co, h, w, cin, Wt.data(), co, kh, kw,
                             dx + (size_t)i * h * w * cin, scratch.data());
}

void conv2d_backward_weights(const float* x, const float* dy, int n, int h, int w, int cin,
                             int co, int kh, int kw, float* dW, float* dbias) {
  const int K = kh * kw * cin;
  for (int k = 0; k < K; ++k)
    conv2d_backward_weights_row(x, dy, n, h, w, cin, co, kh, kw, k, dW + (size_t)k * co);
  conv2d_bias_grad(dy, n, h * w, co, dbias);
}

void maxpool2x2_forward(const float* x, int n, int h, int w, int c, float* y, int* argmax) {
  for (int i = 0; i < n; ++i)
    maxpool_one(x + (size_t)i * h * w * c, h, w, c, y + (size_t)i * (h / 2) * (w / 2) * c,
                argmax + (size_t)i * (h / 2) * (w / 2) * c);
}

void maxpool2x2_backward(const float* dy, int n, int h, int w, int c, const int* argmax,
                         float* dx) {
  const size_t in_sz = (size_t)h * w * c, out_sz = (size_t)(h / 2) * (w / 2) * c;
  std::memset(dx, 0, sizeof(float) * in_sz * n);
  for (int i = 0; i < n; ++i) {
    float* dxs = dx + (size_t)i * in_sz;
    const float* dys = dy + (size_t)i * out_sz;
    const int* am = argmax + (size_t)i * out_sz;
    for (size_t r = 0; r < out_sz; ++r) dxs[am[r]] += dys[r];
  }
}

void upsample2x2_forward(const float* x, int n, int h, int w, int c, float* y) {
  for (int i = 0; i < n; ++i)
    upsample_one(x + (size_t)i * h * w * c, h, w, c, y + (size_t)i * 4 * h * w * c);
}

void upsample2x2_backward(const float* dy, int n, int h, int w, int c, float* dx) {
  for (int i = 0; i < n; ++i)
    upsample_back_one(dy + (size_t)i * 4 * h * w * c, h, w, c, dx + (size_t)i * h * w * c);
}

void dense_forward(const float* x, int n, int din, const float* W, const float* bias, int dout,
                   float* y) {
  for (int i = 0; i < n; ++i) {
    float* out = y + (size_t)i * dout;
    matmul_row(x + (size_t)i * din, W, out, din, dout);
    for (int o = 0; o < dout; ++o) out[o] += bias[o];
  }
}

void dense_backward_data(const float* dy, int n, int din, const float* W, int dout, float* dx) {
  for (int i = 0; i < n; ++i)
    dense_backward_data_one(dy + (size_t)i * dout, W, din, dout, dx + (size_t)i * din);
}

void dense_backward_weights(const float* x, const float* dy, int n, int din, int dout, float* dW,
                            float* dbias) {
  for (int k = 0; k < din; ++k)
    dense_backward_weights_row(x, dy, n, din, dout, k, dW + (size_t)k * dout);
  for (int o = 0; o < dout; ++o) dbias[o] = 0.f;
  for (int i = 0; i < n; ++i) {
    const float* dyr = dy + (size_t)i * dout;
    for (int o = 0; o < dout; ++o) dbias[o] += dyr[o];
  }
}

} // namespace serial

// ========================================================================= omp

namespace omp {

void matmul(const float* A, const float* B, float* C, int M, int K, int N) {
#pragma omp parallel for schedule(static) if (M > 4)
  for (int i = 0; i < M; ++i) matmul_row(A + (size_t)i * K, B, C + (size_t)i * N, K, N);
}

void conv2d_forward(const float* x, int n, int h, int w, int cin, const float* W,
                    const float* bias, int co, int kh, int kw, float* y) {
  const size_t scratch_sz = (size_t)h * w * kh * kw * cin;
#pragma omp parallel
  {
    std::vector<float> scratch(scratch_sz);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i)
      conv2d_forward_one(x + (size_t)i * h * w * cin, h, w, cin, W, bias, co, kh, kw,
                         y + (size_t)i * h * w * co, scratch.data());
  }
}

void conv2d_backward_data(const float* dy, int n, int h, int w, int cin, const float* W, int co,
                          int kh, int kw, float* dx) {
  std::vector<float> Wt;
  transpose(W, kh * kw * cin, co, Wt);
  const size_t scratch_sz = (size_t)h * w * kh * kw * cin;
#pragma omp parallel
  {
    std::vector<float> scratch(scratch_sz);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i)
      conv2d_backward_data_one(dy + (size_t)i * h * w * co, h, w, cin, Wt.data(), co, kh, kw,
                               dx + (size_t)i * h * w * cin, scratch.data());
  }
}

void conv2d_backward_weights(const float* x, const float* dy, int n, int h, int w, int cin,
                             int co, int kh, int kw, float* dW, float* dbias) {
  const int K = kh * kw * cin;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k)
    conv2d_backward_weights_row(x, dy, n, h, w, cin, co, kh, kw, k, dW + (size_t)k * co);
  conv2d_bias_grad(dy, n, h * w, co, dbias);
}

void maxpool2x2_forward(const float* x, int n, int h, int w, int c, float* y, int* argmax) {
#pragma omp parallel for schedule(static) if (n > 8)
  for (int i = 0; i < n; ++i)
    maxpool_one(x + (size_t)i * h * w * c, h, w, c, y + (size_t)i * (h / 2) * (w / 2) * c,
                argmax + (size_t)i * (h / 2) * (w / 2) * c);
}

void maxpool2x2_backward(const float* dy, int n, int h, int w, int c, const int* argmax,
                         float* dx) {
  const size_t in_sz = (size_t)h * w * c, out_sz = (size_t)(h / 2) * (w / 2) * c;
#pragma omp parallel for schedule(static) if (n > 8)
  for (int i = 0; i < n; ++i) {
    float* dxs = dx + (size_t)i * in_sz;
    std::memset(dxs, 0, sizeof(float) * in_sz);
    const float* dys = dy + (size_t)i * out_sz;
    const int* am = argmax + (size_t)i * out_sz;
    for (size_t r = 0; r < out_sz; ++r) dxs[am[r]] += dys[r];
  }
}

void upsample2x2_forward(const float* x, int n, int h, int w, int c, float* y) {
#pragma omp parallel for schedule(static) if (n > 8)
  for (int i = 0; i < n; ++i)
    upsample_one(x + (size_t)i * h * w * c, h, w, c, y + (size_t)i * 4 * h * w * c);
}

void upsample2x2_backward(const float* dy, int n, int h, int w, int c, float* dx) {
#pragma omp parallel for schedule(static) if (n > 8)
  for (int i = 0; i < n; ++i)
    upsample_back_one(dy + (size_t)i * 4 * h * w * c, h, w, c, dx + (size_t)i * h * w * c);
}

void dense_forward(const float* x, int n, int din, const float* W, const float* bias, int dout,
                   float* y) {
#pragma omp parallel for schedule(static) if (n > 4)
  for (int i = 0; i < n; ++i) {
    float* out = y + (size_t)i * dout;
    matmul_row(x + (size_t)i * din, W, out, din, dout);
    for (int o = 0; o < dout; ++o) out[o] += bias[o];
  }
}

void dense_backward_data(const float* dy, int n, int din, const float* W, int dout, float* dx) {
#pragma omp parallel for schedule(static) if (n > 4)
  for (int i = 0; i < n; ++i)
    dense_backward_data_one(dy + (size_t)i * dout, W, din, dout, dx + (size_t)i * din);
}

void dense_backward_weights(const float* x, const float* dy, int n, int din, int dout, float* dW,
                            float* dbias) {
#pragma omp parallel for schedule(static)
  for (int k = 0; k < din; ++k)
    dense_backward_weights_row(x, dy, n, din, dout, k, dW + (size_t)k * dout);
  for (int o = 0; o < dout; ++o) dbias[o] = 0.f;
  for (int i = 0; i < n; ++i) {
    const float* dyr = dy + (size_t)i * dout;
    for (int o = 0; o < dout; ++o) dbias[o] += dyr[o];
  }
}

} // namespace omp

// ==================================================================== dispatch

#define SAEDA_DISPATCH(fn, ...)                                                                  \
  do {                                                                                           \
    if (use_omp())                                                                               \
      omp::fn(__VA_ARGS__);                                                                     \
    else                                                                                         \
      serial::fn(__VA_ARGS__);                                                                  \
  } while (0)

void matmul(const float* A, const float* B, float* C, int M, int K, int N) {
  SAEDA_DISPATCH(matmul, A, B, C, M, K, N);
}
void conv2d_forward(const float* x, int n, int h, int w, int cin, const float* W,
                    const float* bias, int co, int kh, int kw, float* y) {
  SAEDA_DISPATCH(conv2d_forward, x, n, h, w, cin, W, bias, co, kh, kw, y);
}
void conv2d_backward_data(const float* dy, int n, int h, int w, int cin, const float* W, int co,
                          int kh, int kw, float* dx) {
  SAEDA_DISPATCH(conv2d_backward_data, dy, n, h, w, cin, W, co, kh, kw, dx);
}
void conv2d_backward_weights(const float* x, const float* dy, int n, int h, int w, int cin,
                             int co, int kh, int kw, float* dW, float* dbias) {
  SAEDA_DISPATCH(conv2d_backward_weights, x, dy, n, h, w, cin, co, kh, kw, dW, dbias);
}
void maxpool2x2_forward(const float* x, int n, int h, int w, int c, float* y, int* argmax) {
  SAEDA_DISPATCH(maxpool2x2_forward, x, n, h, w, c, y, argmax);
}
void maxpool2x2_backward(const float* dy, int n, int h, int w, int c, const int* argmax,
                         float* dx) {
  SAEDA_DISPATCH(maxpool2x2_backward, dy, n, h, w, c, argmax, dx);
}
void upsample2x2_forward(const float* x, int n, int h, int w, int c, float* y) {
  SAEDA_DISPATCH(upsample2x2_forward, x, n, h, w, c, y);
}
void upsample2x2_backward(const float* dy, int n, int h, int w, int c, float* dx) {
  SAEDA_DISPATCH(upsample2x2_backward, dy, n, h, w, c, dx);
}
void dense_forward(const float* x, int n, int din, const float* W, const float* bias, int dout,
                   float* y) {
  SAEDA_DISPATCH(dense_forward, x, n, din, W, bias, dout, y);
}
void dense_backward_data(const float* dy, int n, int din, const float* W, int dout, float* dx) {
  SAEDA_DISPATCH(dense_backward_data, dy, n, din, W, dout, dx);
}
void dense_backward_weights(const float* x, const float* dy, int n, int din, int dout, float* dW,
                            float* dbias) {
  SAEDA_DISPATCH(dense_backward_weights, x, dy, n, din, dout, dW, dbias);
}

#undef SAEDA_DISPATCH

} // namespace saeda::kernels
