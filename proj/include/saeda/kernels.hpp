#pragma once
// Compute kernels for the network layers. Two implementations of every
// kernel are kept:
//
//   kernels::serial — straightforward reference loops, no threading;
//   kernels::omp    — the same arithmetic with OpenMP pragmas on an outer
//                     loop over DISJOINT output elements (samples, or
//                     weight rows for weight gradients).
//
// Because a parallel loop only ever partitions independent outputs and
// every inner summation keeps the serial order, the two namespaces produce
// bitwise-identical results for any thread count. Tests assert that;
// bench/bench_kernels.cpp compares their throughput.
//
// Data layout: batches are [n][h][w][c] (channel-last, samples contiguous);
// conv weights are [kh*kw*cin][co] matching the im2col patch order
// (ky-major, then kx, then input channel); dense weights are [din][dout].
// Convolutions use "same" padding with stride 1: pad_top = (kh-1)/2,
// pad_left = (kw-1)/2 (floor), so even kernels pad only on the right/bottom.

#include <cstddef>

namespace saeda::kernels {

enum class Mode { auto_pick, serial_only, omp_only };

void set_mode(Mode m);
Mode mode();
// honors SAEDA_THREADS (caps OpenMP threads); called by every entry point.
void configure_threads_from_env();
int thread_count();

// im2col for one sample: x[h][w][cin] -> col[h*w][kh*kw*cin], "same" padding.
void im2col_same(const float* x, int h, int w, int cin, int kh, int kw, float* col);

#define SAEDA_KERNEL_SIGNATURES                                                                  \
  /* C[M][N] = A[M][K] * B[K][N] (row-major) */                                                  \
  void matmul(const float* A, const float* B, float* C, int M, int K, int N);                    \
  /* y[n][h][w][co] = conv(x[n][h][w][cin], W[kh*kw*cin][co]) + bias */                          \
  void conv2d_forward(const float* x, int n, int h, int w, int cin, const float* W,              \
                      const float* bias, int co, int kh, int kw, float* y);                      \
  /* dx[n][h][w][cin] from dy[n][h][w][co] */                                                    \
  void conv2d_backward_data(const float* dy, int n, int h, int w, int cin, const float* W,       \
                            int co, int kh, int kw, float* dx);                                  \
  /* dW[kh*kw*cin][co], dbias[co] summed over the whole batch */                                 \
  void conv2d_backward_weights(const float* x, const float* dy, int n, int h, int w, int cin,    \
                               int co, int kh, int kw, float* dW, float* dbias);                 \
  /* h, w must be even; argmax stores the flat within-sample input index */                      \
  void maxpool2x2_forward(const float* x, int n, int h, int w, int c, float* y, int* argmax);    \
  void maxpool2x2_backward(const float* dy, int n, int h, int w, int c, const int* argmax,       \
                           float* dx);                                                           \
  /* nearest-neighbour 2x2; h, w are the INPUT dims */                                           \
  void upsample2x2_forward(const float* x, int n, int h, int w, int c, float* y);                \
  void upsample2x2_backward(const float* dy, int n, int h, int w, int c, float* dx);             \
  /* y[n][dout] = x[n][din] * W[din][dout] + bias */                                             \
  void dense_forward(const float* x, int n, int din, const float* W, const float* bias,         \
                     int dout, float* y);                                                        \
  void dense_backward_data(const float* dy, int n, int din, const float* W, int dout,           \
                           float* dx);                                                           \
  void dense_backward_weights(const float* x, const float* dy, int n, int din, int dout,        \
                              float* dW, float* dbias);

namespace serial {
SAEDA_KERNEL_SIGNATURES
}
namespace omp {
SAEDA_KERNEL_SIGNATURES
}

// Dispatch (module-level functions pick serial or omp per the active mode).
SAEDA_KERNEL_SIGNATURES

#undef SAEDA_KERNEL_SIGNATURES

} // namespace saeda::kernels
