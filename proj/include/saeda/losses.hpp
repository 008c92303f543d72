#pragma once
// Objective functions: reconstruction BCE, centroid MMD, class-wise MMD,
// the composite target loss, categorical cross-entropy and MSE — plus the
// analytic gradients the trainer needs.
//
// Everything is templated on the scalar type: training instantiates at
// float, while the test suite instantiates at double so oracle equivalence
// (1e-6) and finite-difference gradient checks (1e-4) are meaningful.
// Reductions always accumulate in double, in a fixed serial order, so a
// given input yields the same bits regardless of thread count.
//
// Conventions baked in here:
//   * reconstruction losses are the mean over samples of the per-sample
//     SUM over elements (the per-sample form carries the sum; the batch
//     reduction is a mean so loss scales are batch-size invariant);
//   * MMD is the linear (centroid) form: squared Euclidean distance of
//     feature means — no kernels;
//   * a class missing from either side of the class-wise MMD is an error,
//     never a silent skip (skipping would change the objective).

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "saeda/errors.hpp"

namespace saeda {

template <class T>
struct LossConfigT {
  T beta = (T)0.25;     // weight of the class-wise MMD term inside L_t
  T epsilon = (T)1e-7;  // probability clamp inside logarithms
};
using LossConfig = LossConfigT<float>;

template <class T>
void validate(const LossConfigT<T>& cfg) {
  if (!(cfg.beta >= (T)0)) fail(ErrCode::bad_config, "loss config: beta must be >= 0");
  if (!(cfg.epsilon > (T)0) || !(cfg.epsilon < (T)1e-3))
    fail(ErrCode::bad_config, "loss config: epsilon must lie in (0, 1e-3)");
}

template <class T>
struct LossPartsT {
  T recon = 0; // reconstruction BCE
  T cws = 0;   // class-wise MMD
};
using LossParts = LossPartsT<float>;

namespace detail {

template <class T>
inline T clamp_prob(T p, T eps) {
  if (p < eps) return eps;
  if (p > (T)1 - eps) return (T)1 - eps;
  return p;
}

// per-class centroids; throws missing_class if any class has no rows.
template <class T>
inline void class_centroids(const T* x, const std::vector<int>& y, int width, int C,
                            std::vector<double>& centroids, std::vector<int>& counts,
                            const char* side) {
  centroids.assign((size_t)C * width, 0.0);
  counts.assign(C, 0);
  for (size_t i = 0; i < y.size(); ++i) {
    int k = y[i];
    if (k < 0 || k >= C)
      fail(ErrCode::value_error, "class id " + std::to_string(k) + " outside [0, C)");
    ++counts[k];
    const T* row = x + i * width;
    double* ctr = centroids.data() + (size_t)k * width;
    for (int j = 0; j < width; ++j) ctr[j] += (double)row[j];
  }
  for (int k = 0; k < C; ++k) {
    if (counts[k] == 0)
      fail(ErrCode::missing_class,
           std::string("class ") + std::to_string(k) + " has no samples in the " + side +
               " batch; class-wise MMD requires every class on both sides");
    double inv = 1.0 / counts[k];
    for (int j = 0; j < width; ++j) centroids[(size_t)k * width + j] *= inv;
  }
}

} // namespace detail

// ---------------------------------------------------------------- BCE (L_s, L_r)

// x: n*dim values in [0,1]; p: n*dim reconstruction probabilities.
template <class T>
T reconstruction_bce(const T* x, const T* p, int n, int dim, T eps) {
  if (n <= 0 || dim <= 0) fail(ErrCode::value_error, "reconstruction_bce: empty batch");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const T* xi = x + (size_t)i * dim;
    const T* pi = p + (size_t)i * dim;
    double s = 0.0;
    for (int j = 0; j < dim; ++j) {
      double pj = (double)detail::clamp_prob(pi[j], eps);
      double xj = (double)xi[j];
      s += xj * std::log(pj) + (1.0 - xj) * std::log(1.0 - pj);
    }
    total -= s;
  }
  return (T)(total / n);
}

// d loss / d p. The clamp zeroes the gradient outside (eps, 1-eps).
template <class T>
void reconstruction_bce_grad(const T* x, const T* p, int n, int dim, T eps, T* gp) {
  double inv_n = 1.0 / n;
  for (size_t i = 0; i < (size_t)n * dim; ++i) {
    double pj = (double)p[i];
    if (pj <= (double)eps || pj >= 1.0 - (double)eps) {
      gp[i] = (T)0;
      continue;
    }
    gp[i] = (T)((pj - (double)x[i]) / (pj * (1.0 - pj)) * inv_n);
  }
}

// ----------------------------------------------------------------- centroid MMD

template <class T>
T mmd_loss(const T* a, int na, const T* b, int nb, int width) {
  if (na <= 0 || nb <= 0) fail(ErrCode::value_error, "mmd_loss: empty feature matrix");
  if (width <= 0) fail(ErrCode::shape_mismatch, "mmd_loss: feature width must be positive");
  double out = 0.0;
  for (int j = 0; j < width; ++j) {
    double ma = 0.0, mb = 0.0;
    for (int i = 0; i < na; ++i) ma += (double)a[(size_t)i * width + j];
    for (int i = 0; i < nb; ++i) mb += (double)b[(size_t)i * width + j];
    double d = ma / na - mb / nb;
    out += d * d;
  }
  return (T)out;
}

template <class T>
void mmd_grad(const T* a, int na, const T* b, int nb, int width, T* ga, T* gb) {
  std::vector<double> diff(width, 0.0);
  for (int j = 0; j < width; ++j) {
    double ma = 0.0, mb = 0.0;
    for (int i = 0; i < na; ++i) ma += (double)a[(size_t)i * width + j];
    for (int i = 0; i < nb; ++i) mb += (double)b[(size_t)i * width + j];
    diff[j] = ma / na - mb / nb;
  }
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < width; ++j) ga[(size_t)i * width + j] = (T)(2.0 * diff[j] / na);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < width; ++j) gb[(size_t)i * width + j] = (T)(-2.0 * diff[j] / nb);
}

// --------------------------------------------------------------- class-wise MMD

template <class T>
T cws_mmd_loss(const T* a, const std::vector<int>& ya, const T* b, const std::vector<int>& yb,
               int width, int C) {
  if (C <= 0) fail(ErrCode::value_error, "cws_mmd_loss: C must be positive");
  std::vector<double> ca, cb;
  std::vector<int> na, nb;
  detail::class_centroids(a, ya, width, C, ca, na, "source");
  detail::class_centroids(b, yb, width, C, cb, nb, "target");
  double out = 0.0;
  for (size_t j = 0; j < ca.size(); ++j) {
    double d = ca[j] - cb[j];
    out += d * d;
  }
  return (T)(out / C);
}

template <class T>
void cws_mmd_grad(const T* a, const std::vector<int>& ya, const T* b, const std::vector<int>& yb,
                  int width, int C, T* ga, T* gb) {
  std::vector<double> ca, cb;
  std::vector<int> na, nb;
  detail::class_centroids(a, ya, width, C, ca, na, "source");
  detail::class_centroids(b, yb, width, C, cb, nb, "target");
  for (size_t i = 0; i < ya.size(); ++i) {
    int k = ya[i];
    const double* d = ca.data() + (size_t)k * width;
    const double* e = cb.data() + (size_t)k * width;
    double scale = 2.0 / ((double)C * na[k]);
    for (int j = 0; j < width; ++j) ga[i * width + j] = (T)(scale * (d[j] - e[j]));
  }
  for (size_t i = 0; i < yb.size(); ++i) {
    int k = yb[i];
    const double* d = ca.data() + (size_t)k * width;
    const double* e = cb.data() + (size_t)k * width;
    double scale = -2.0 / ((double)C * nb[k]);
    for (int j = 0; j < width; ++j) gb[i * width + j] = (T)(scale * (d[j] - e[j]));
  }
}

// ------------------------------------------------------- composite target loss

// L_t = L_r + beta * L_cws_MMD over one aligned batch pair. x_t/p_t are the
// target batch and its reconstruction; fs/ft are the source and target
// bottleneck features with their labels.
template <class T>
std::pair<T, LossPartsT<T>> target_composite_loss(const T* x_t, const T* p_t, int n, int dim,
                                                  const T* fs, const std::vector<int>& ys,
                                                  const T* ft, const std::vector<int>& yt,
                                                  int width, int C, const LossConfigT<T>& cfg) {
  LossPartsT<T> parts;
  parts.recon = reconstruction_bce(x_t, p_t, n, dim, cfg.epsilon);
  parts.cws = cws_mmd_loss(fs, ys, ft, yt, width, C);
  return {(T)(parts.recon + cfg.beta * parts.cws), parts};
}

template <class T>
void target_composite_grad(const T* x_t, const T* p_t, int n, int dim, const T* fs,
                           const std::vector<int>& ys, const T* ft, const std::vector<int>& yt,
                           int width, int C, const LossConfigT<T>& cfg, T* gp, T* gfs, T* gft) {
  reconstruction_bce_grad(x_t, p_t, n, dim, cfg.epsilon, gp);
  cws_mmd_grad(fs, ys, ft, yt, width, C, gfs, gft);
  for (size_t i = 0; i < ys.size() * (size_t)width; ++i) gfs[i] = (T)(gfs[i] * cfg.beta);
  for (size_t i = 0; i < yt.size() * (size_t)width; ++i) gft[i] = (T)(gft[i] * cfg.beta);
}

// ------------------------------------------------------- classifier / regressor

template <class T>
T categorical_cross_entropy(const std::vector<int>& y, const T* prob, int n, int C, T eps) {
  if ((int)y.size() != n) fail(ErrCode::shape_mismatch, "cross entropy: label count != rows");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const T* row = prob + (size_t)i * C;
    double sum = 0.0;
    for (int k = 0; k < C; ++k) sum += (double)row[k];
    if (std::abs(sum - 1.0) > 1e-6)
      fail(ErrCode::value_error,
           "cross entropy: probability row " + std::to_string(i) + " sums to " +
               std::to_string(sum));
    if (y[i] < 0 || y[i] >= C) fail(ErrCode::value_error, "cross entropy: label out of range");
    total -= std::log((double)detail::clamp_prob(row[y[i]], eps));
  }
  return (T)(total / n);
}

template <class T>
T mse_loss(const std::vector<T>& y_true, const std::vector<T>& y_pred) {
  if (y_true.size() != y_pred.size())
    fail(ErrCode::shape_mismatch, "mse_loss: length mismatch");
  if (y_true.empty()) fail(ErrCode::value_error, "mse_loss: empty input");
  double total = 0.0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    double d = (double)y_true[i] - (double)y_pred[i];
    total += d * d;
  }
  return (T)(total / y_true.size());
}

} // namespace saeda
