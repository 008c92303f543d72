#include "saeda/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "saeda/errors.hpp"
#include "saeda/rng.hpp"

namespace saeda {

// Sandpaper grit -> mean surface roughness (micrometers). Regression class
// slot k is bound to row k of this table.
const std::vector<float> kRoughnessSchedule = {59.5f, 30.0f, 23.1f, 15.1f, 9.2f};
const std::vector<int> kRoughnessGrits = {120, 240, 320, 500, 1000};

void validate(const DatasetConfig& cfg) {
  if (cfg.num_classes < 2) fail(ErrCode::bad_config, "num_classes must be at least 2");
  if (cfg.samples_per_class_source < 1 || cfg.samples_per_class_target_labeled < 1 ||
      cfg.samples_per_class_target_unlabeled < 1)
    fail(ErrCode::bad_config, "per-class sample counts must be at least 1");
  for (const Shape3& s : {cfg.source_shape, cfg.target_shape})
    if (s.h < 1 || s.w < 1 || s.c < 1)
      fail(ErrCode::bad_config, "shape entries must be at least 1");
  if (cfg.noise_sigma_source < 0.f || cfg.noise_sigma_target < 0.f)
    fail(ErrCode::bad_config, "noise sigmas must be non-negative");
  if (cfg.jitter_sigma < 0.f) fail(ErrCode::bad_config, "jitter_sigma must be non-negative");
  if (cfg.task == DatasetConfig::Task::regression &&
      cfg.num_classes > (int)kRoughnessSchedule.size())
    fail(ErrCode::schedule_slots,
         "regression task has " + std::to_string(kRoughnessSchedule.size()) +
             " roughness schedule slots, config asks for " + std::to_string(cfg.num_classes) +
             " classes");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

// One modality's fixed deterministic renderer: latent vector in, image out.
// The mixing basis is a set of L smooth random fields (sums of low-frequency
// sinusoids), Gram-Schmidt-orthonormalized over the pixel grid so distinct
// latent directions produce genuinely distinct patterns. The gain scales the
// mixed field so the squashing nonlinearity operates in its responsive range
// (orthonormal columns put single-pixel magnitudes near 1/sqrt(d)).
struct Renderer {
  Shape3 shape;
  int L = 0;
  float gain = 1.f;
  enum class Squash { logistic, soft_tanh } squash = Squash::logistic;
  std::vector<float> basis; // [L][h*w*c]

  int dim() const { return (int)shape.numel(); }

  void render(const float* u, float* out) const {
    const int d = dim();
    for (int p = 0; p < d; ++p) {
      double v = 0.0;
      for (int l = 0; l < L; ++l) v += (double)u[l] * basis[(size_t)l * d + p];
      v *= gain;
      const double y = squash == Squash::logistic ? 1.0 / (1.0 + std::exp(-v))
                                                  : 0.5 + 0.5 * std::tanh(0.8 * v);
      out[p] = (float)y;
    }
  }
};

Renderer make_renderer(const Shape3& shape, int L, bool source_modality, uint64_t seed) {
  Renderer r;
  r.shape = shape;
  r.L = L;
  const int d = (int)shape.numel();
  // The |basis entry| ~ 1/sqrt(d) scale cancels against sqrt(d); the source
  // sits a bit below logistic saturation, the target gets a lower gain on
  // top of its shallower squash so its class contrast is genuinely weaker.
  r.gain = source_modality ? std::sqrt((float)d) / 3.f : 0.6f * std::sqrt((float)d) / 3.f;
  r.squash = source_modality ? Renderer::Squash::logistic : Renderer::Squash::soft_tanh;

  rng::Rng rnd(rng::derive(seed, rng::tag(source_modality ? "render-source" : "render-target")));
  r.basis.assign((size_t)L * d, 0.f);
  for (int l = 0; l < L; ++l) {
    float* f = &r.basis[(size_t)l * d];
    for (int wave = 0; wave < 5; ++wave) {
      const double fy = rnd.uniform(0.5, 3.0);
      const double fx = rnd.uniform(0.5, 3.0);
      const double phase = rnd.uniform(0.0, 2.0 * kPi);
      const double chphase = rnd.uniform(0.0, 2.0 * kPi);
      const double amp = rnd.uniform(0.4, 1.0);
      size_t p = 0;
      for (int y = 0; y < shape.h; ++y)
        for (int x = 0; x < shape.w; ++x)
          for (int ch = 0; ch < shape.c; ++ch, ++p)
            f[p] += (float)(amp * std::sin(2.0 * kPi * (fy * y / shape.h + fx * x / shape.w) +
                                           phase + ch * chphase));
    }
  }
  // Gram-Schmidt over pixels; double accumulation keeps the basis stable.
  for (int l = 0; l < L; ++l) {
    float* f = &r.basis[(size_t)l * d];
    for (int m = 0; m < l; ++m) {
      const float* g = &r.basis[(size_t)m * d];
      double dot = 0.0;
      for (int p = 0; p < d; ++p) dot += (double)f[p] * g[p];
      for (int p = 0; p < d; ++p) f[p] = (float)(f[p] - dot * g[p]);
    }
    double nrm2 = 0.0;
    for (int p = 0; p < d; ++p) nrm2 += (double)f[p] * f[p];
    if (nrm2 < 1e-12)
      fail(ErrCode::value_error, "renderer basis came out degenerate; raise the image size");
    const double inv = 1.0 / std::sqrt(nrm2);
    for (int p = 0; p < d; ++p) f[p] = (float)(f[p] * inv);
  }
  return r;
}

std::vector<std::string> make_class_names(const DatasetConfig& cfg) {
  std::vector<std::string> names;
  for (int k = 0; k < cfg.num_classes; ++k)
    names.push_back(cfg.task == DatasetConfig::Task::regression
                        ? "grit_" + std::to_string(kRoughnessGrits[k])
                        : "class_" + std::to_string(k));
  return names;
}

} // namespace

PairedData generate_paired(const DatasetConfig& cfg) {
  validate(cfg);
  const int C = cfg.num_classes;
  const int L = C + 4; // class directions plus a few shared nuisance directions

  const Renderer src = make_renderer(cfg.source_shape, L, true, cfg.seed);
  const Renderer tgt = make_renderer(cfg.target_shape, L, false, cfg.seed);

  // Class latent codes z_k = 2 e_k: distinct by construction, with room left
  // for per-sample jitter in the remaining directions.
  std::vector<float> codes((size_t)C * L, 0.f);
  for (int k = 0; k < C; ++k) codes[(size_t)k * L + k] = 2.f;

  // Noise-free source prototypes back the separability guarantee: every
  // pre-noise source sample must sit nearest its own class prototype.
  std::vector<float> protos((size_t)C * src.dim());
  for (int k = 0; k < C; ++k) src.render(&codes[(size_t)k * L], &protos[(size_t)k * src.dim()]);

  const std::vector<std::string> names = make_class_names(cfg);

  // Each sample draws from its own derived stream (jitter first, then pixel
  // noise), so the loop could run per-sample in parallel without changing a
  // bit; ordering is fixed as class-major by index.
  auto render_split = [&](const Renderer& ren, SplitTag split, const char* stream, int per_class,
                          float noise_sigma, bool with_labels) {
    Dataset d;
    d.shape = ren.shape;
    d.n = C * per_class;
    d.split = split;
    d.class_names = names;
    d.samples.resize((size_t)d.n * ren.dim());
    std::vector<float> u(L);
    for (int k = 0; k < C; ++k) {
      for (int j = 0; j < per_class; ++j) {
        const int idx = k * per_class + j;
        rng::Rng r(rng::derive(cfg.seed, rng::tag(stream), (uint64_t)idx));
        for (int l = 0; l < L; ++l)
          u[l] = codes[(size_t)k * L + l] + cfg.jitter_sigma * (float)r.normal();
        float* img = &d.samples[(size_t)idx * ren.dim()];
        ren.render(u.data(), img);
        if (split == SplitTag::source) {
          // Nearest-prototype check on the pre-noise render.
          int best = -1;
          double best_d2 = 0.0;
          for (int c = 0; c < C; ++c) {
            const float* pr = &protos[(size_t)c * ren.dim()];
            double d2 = 0.0;
            for (int p = 0; p < ren.dim(); ++p) {
              const double diff = (double)img[p] - pr[p];
              d2 += diff * diff;
            }
            if (best < 0 || d2 < best_d2) {
              best = c;
              best_d2 = d2;
            }
          }
          if (best != k)
            fail(ErrCode::value_error,
                 "separability violated: source sample " + std::to_string(idx) +
                     " of class " + std::to_string(k) + " renders nearest class " +
                     std::to_string(best) + "; lower jitter_sigma");
        }
        for (int p = 0; p < ren.dim(); ++p) {
          const float noisy = img[p] + noise_sigma * (float)r.normal();
          img[p] = std::min(std::max(noisy, 0.f), 1.f);
        }
        if (with_labels) d.labels.push_back(k);
        if (with_labels && cfg.task == DatasetConfig::Task::regression)
          d.targets.push_back(kRoughnessSchedule[k]);
      }
    }
    d.check();
    return d;
  };

  PairedData out;
  out.source = render_split(src, SplitTag::source, "gen-source", cfg.samples_per_class_source,
                            cfg.noise_sigma_source, true);
  out.target_labeled =
      render_split(tgt, SplitTag::target_labeled, "gen-target-labeled",
                   cfg.samples_per_class_target_labeled, cfg.noise_sigma_target, true);
  out.target_unlabeled =
      render_split(tgt, SplitTag::target_unlabeled, "gen-target-unlabeled",
                   cfg.samples_per_class_target_unlabeled, cfg.noise_sigma_target, false);

  // Ground truth for the unlabeled split travels outside the Dataset so the
  // training pipeline can never touch it.
  for (int k = 0; k < C; ++k)
    for (int j = 0; j < cfg.samples_per_class_target_unlabeled; ++j) {
      out.truth.labels.push_back(k);
      if (cfg.task == DatasetConfig::Task::regression)
        out.truth.targets.push_back(kRoughnessSchedule[k]);
    }
  return out;
}

} // namespace saeda
