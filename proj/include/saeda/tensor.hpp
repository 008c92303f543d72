#pragma once
// Small POD-ish containers used everywhere: an image shape, a batch of
// image-like samples, and a dense row-major matrix. Samples are stored
// flattened in h-major / w-next / channel-last order, one sample after
// another, which is exactly the on-disk f32le layout — so save/load is a
// straight memcpy and "flatten" before a dense layer is a no-op view.

#include <cstddef>
#include <vector>

#include "saeda/errors.hpp"

namespace saeda {

struct Shape3 {
  int h = 0, w = 0, c = 0;

  int numel() const { return h * w * c; }
  bool operator==(const Shape3&) const = default;
};

// N samples of a common Shape3, contiguous.
struct Batch {
  Shape3 shape;
  int n = 0;
  std::vector<float> data; // n * shape.numel()

  Batch() = default;
  Batch(Shape3 s, int count) : shape(s), n(count), data((size_t)count * s.numel(), 0.f) {}

  int dim() const { return shape.numel(); }
  float* sample(int i) { return data.data() + (size_t)i * dim(); }
  const float* sample(int i) const { return data.data() + (size_t)i * dim(); }
};

// Row-major matrix (rows = samples), used for bottleneck features, head
// activations and probability tables.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<float> data; // rows * cols

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data((size_t)r * c, 0.f) {}

  float* row(int i) { return data.data() + (size_t)i * cols; }
  const float* row(int i) const { return data.data() + (size_t)i * cols; }
  float& at(int i, int j) { return data[(size_t)i * cols + j]; }
  float at(int i, int j) const { return data[(size_t)i * cols + j]; }
};

inline void require_same_shape(const Batch& a, const Batch& b, const char* what) {
  if (!(a.shape == b.shape) || a.n != b.n)
    fail(ErrCode::shape_mismatch, std::string(what) + ": batch shapes differ");
}

} // namespace saeda
