#include "saeda/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "saeda/errors.hpp"
#include "saeda/rng.hpp"

namespace saeda {

namespace fs = std::filesystem;
using json = nlohmann::json;

void validate(const TrainingConfig& cfg, int num_classes) {
  validate(cfg.loss);
  if (!(cfg.learning_rate > 0.f))
    fail(ErrCode::bad_config, "training config: learning_rate must be positive");
  if (cfg.batch_size < 1) fail(ErrCode::bad_config, "training config: batch_size must be positive");
  if (num_classes > 0 && cfg.batch_size < num_classes)
    fail(ErrCode::bad_config, "training config: batch_size " + std::to_string(cfg.batch_size) +
                                  " is smaller than the class count " +
                                  std::to_string(num_classes) +
                                  "; class-aligned batches need batch_size >= C");
  if (cfg.max_epochs_per_stage < 0)
    fail(ErrCode::bad_config, "training config: max_epochs_per_stage must be >= 0");
  if (!(cfg.min_rel_improvement > 0.f))
    fail(ErrCode::bad_config, "training config: min_rel_improvement must be positive");
  if (cfg.patience < 1) fail(ErrCode::bad_config, "training config: patience must be >= 1");
  if (cfg.bottleneck_size < 1)
    fail(ErrCode::bad_config, "training config: bottleneck_size must be positive");
  for (int w : cfg.classifier_hidden)
    if (w < 1) fail(ErrCode::bad_config, "training config: classifier widths must be positive");
}

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double secs() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// "relative improvement below tol for `patience` consecutive epochs".
class ConvergenceTracker {
public:
  ConvergenceTracker(float tol, int patience) : tol_(tol), patience_(patience) {}
  bool update(double loss) {
    if (have_prev_) {
      const double rel = (prev_ - loss) / std::max(std::abs(prev_), 1e-12);
      run_ = rel < tol_ ? run_ + 1 : 0;
    }
    prev_ = loss;
    have_prev_ = true;
    return run_ >= patience_;
  }

private:
  double tol_;
  int patience_;
  double prev_ = 0.0;
  int run_ = 0;
  bool have_prev_ = false;
};

std::vector<std::vector<int>> rows_by_class(const std::vector<int>& labels, int min_classes) {
  int C = min_classes;
  for (int l : labels) C = std::max(C, l + 1);
  std::vector<std::vector<int>> rows(C);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) fail(ErrCode::value_error, "negative class label");
    rows[labels[i]].push_back((int)i);
  }
  return rows;
}

void append_row(Dataset& dst, const Dataset& src, int row) {
  const float* s = src.sample(row);
  dst.samples.insert(dst.samples.end(), s, s + src.dim());
  dst.labels.push_back(src.labels[row]);
  if (src.has_targets()) dst.targets.push_back(src.targets[row]);
  ++dst.n;
}

// C as the losses see it: the classifier head pins it; regression falls back
// to the class-name table or the labels themselves.
int num_classes_of(const AdaptationModel& model, const Dataset& a, const Dataset& b) {
  if (model.head.spec.kind == HeadSpec::Kind::softmax_classifier)
    return model.head.spec.output_size;
  int C = (int)std::max(a.class_names.size(), b.class_names.size());
  for (int l : a.labels) C = std::max(C, l + 1);
  for (int l : b.labels) C = std::max(C, l + 1);
  return C;
}

void require_shape(const Dataset& d, const Shape3& want, const char* who) {
  if (!(d.shape == want))
    fail(ErrCode::shape_mismatch, std::string(who) + ": dataset shape " +
                                      std::to_string(d.shape.h) + "x" + std::to_string(d.shape.w) +
                                      "x" + std::to_string(d.shape.c) +
                                      " does not match the model's input shape");
}

Mat encode_dataset(Autoencoder& ae, const float* samples, int n, int chunk) {
  const int b = ae.spec.bottleneck_size;
  const size_t dim = ae.spec.input_shape.numel();
  Mat out(n, b);
  for (int start = 0; start < n; start += chunk) {
    const int m = std::min(chunk, n - start);
    const Mat z = ae.encode(samples + (size_t)start * dim, m);
    std::memcpy(out.row(start), z.data.data(), (size_t)m * b * sizeof(float));
  }
  return out;
}

constexpr int kPredictChunk = 64;

Predictions predict_impl(Autoencoder& enc, Head& head, const float* samples, int n,
                         const Shape3& shape, float target_mean, float target_scale) {
  if (!(shape == enc.spec.input_shape))
    fail(ErrCode::shape_mismatch, "predict: sample shape does not match the encoder input");
  Predictions out;
  const int C = head.spec.output_size;
  const bool classify = head.spec.kind == HeadSpec::Kind::softmax_classifier;
  if (classify) out.probabilities = Mat(n, C);
  const size_t dim = shape.numel();
  for (int start = 0; start < n; start += kPredictChunk) {
    const int m = std::min(kPredictChunk, n - start);
    const Mat z = enc.encode(samples + (size_t)start * dim, m);
    if (classify) {
      const Mat p = head.probabilities(z.data.data(), m);
      std::memcpy(out.probabilities.row(start), p.data.data(), (size_t)m * C * sizeof(float));
      for (int i = 0; i < m; ++i) {
        const float* row = p.row(i);
        int best = 0;
        for (int k = 1; k < C; ++k)
          if (row[k] > row[best]) best = k;
        out.labels.push_back(best);
      }
    } else {
      const auto& y = head.forward(z.data.data(), m);
      for (int i = 0; i < m; ++i) out.values.push_back(y[i] * target_scale + target_mean);
    }
  }
  return out;
}

// Stages 2 and 3 share this: the encoder is frozen, so the head trains on a
// fixed feature matrix. A stratified seeded 10% holdout drives convergence
// (training loss stands in when the holdout comes out empty). For the
// regressor, `norm_targets` carries the already-normalized labels.
StageReport train_head_on_features(Head& head, const Mat& feats, const std::vector<int>& labels,
                                   const std::vector<float>& norm_targets, int C,
                                   const TrainingConfig& cfg, int stage_id, uint64_t stream) {
  Timer stage_timer;
  StageReport rep;
  rep.stage = stage_id;
  const int b = feats.cols;
  const bool classify = head.spec.kind == HeadSpec::Kind::softmax_classifier;

  std::vector<int> train, hold;
  auto by_class = rows_by_class(labels, C);
  for (size_t k = 0; k < by_class.size(); ++k) {
    auto& idx = by_class[k];
    rng::Rng r(rng::derive(stream, rng::tag("holdout"), (uint64_t)k));
    r.shuffle(idx);
    const size_t h = idx.size() / 10;
    hold.insert(hold.end(), idx.begin(), idx.begin() + h);
    train.insert(train.end(), idx.begin() + h, idx.end());
  }
  if (train.empty()) fail(ErrCode::value_error, "head training: no samples left after holdout");

  AdamParams ap;
  ap.lr = cfg.learning_rate;
  ConvergenceTracker conv(cfg.min_rel_improvement, cfg.patience);
  int64_t t = 0;

  std::vector<float> xb, dlogits;
  std::vector<int> yb;

  // mean loss of the current head over a fixed row set (no updates).
  auto eval_rows = [&](const std::vector<int>& rows_) {
    double sum = 0.0;
    for (size_t start = 0; start < rows_.size(); start += (size_t)cfg.batch_size) {
      const int m = (int)std::min((size_t)cfg.batch_size, rows_.size() - start);
      xb.resize((size_t)m * b);
      for (int i = 0; i < m; ++i)
        std::memcpy(&xb[(size_t)i * b], feats.row(rows_[start + i]), (size_t)b * sizeof(float));
      if (classify) {
        yb.assign(m, 0);
        for (int i = 0; i < m; ++i) yb[i] = labels[rows_[start + i]];
        const Mat p = head.probabilities(xb.data(), m);
        sum += (double)categorical_cross_entropy(yb, p.data.data(), m, C, cfg.loss.epsilon) * m;
      } else {
        const auto& y = head.forward(xb.data(), m);
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
          const double diff = (double)y[i] - norm_targets[rows_[start + i]];
          s += diff * diff;
        }
        sum += s;
      }
    }
    return sum / rows_.size();
  };

  for (int epoch = 0; epoch < cfg.max_epochs_per_stage; ++epoch) {
    Timer et;
    std::vector<int> order = train;
    rng::Rng shuf(rng::derive(stream, rng::tag("epoch-shuffle"), (uint64_t)epoch));
    shuf.shuffle(order);

    double train_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += (size_t)cfg.batch_size) {
      const int m = (int)std::min((size_t)cfg.batch_size, order.size() - start);
      xb.resize((size_t)m * b);
      for (int i = 0; i < m; ++i)
        std::memcpy(&xb[(size_t)i * b], feats.row(order[start + i]), (size_t)b * sizeof(float));

      float loss;
      const int width = head.spec.output_size;
      dlogits.assign((size_t)m * width, 0.f);
      if (classify) {
        yb.assign(m, 0);
        for (int i = 0; i < m; ++i) yb[i] = labels[order[start + i]];
        const Mat p = head.probabilities(xb.data(), m);
        loss = categorical_cross_entropy(yb, p.data.data(), m, C, cfg.loss.epsilon);
        for (int i = 0; i < m; ++i) {
          const float* row = p.row(i);
          for (int k = 0; k < C; ++k)
            dlogits[(size_t)i * C + k] = (row[k] - (k == yb[i] ? 1.f : 0.f)) / m;
        }
      } else {
        const auto& y = head.forward(xb.data(), m);
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
          const double diff = (double)y[i] - norm_targets[order[start + i]];
          s += diff * diff;
          dlogits[i] = (float)(2.0 * diff / m);
        }
        loss = (float)(s / m);
      }
      if (!std::isfinite(loss))
        fail(ErrCode::divergence, "head training loss became non-finite in stage " +
                                      std::to_string(stage_id) + ", epoch " +
                                      std::to_string(epoch));
      head.backward(dlogits.data(), m);
      ++t;
      head.step(ap, t);
      train_sum += (double)loss * m;
    }

    EpochRecord rec;
    rec.train_loss = train_sum / train.size();
    rec.holdout_loss = hold.empty() ? rec.train_loss : eval_rows(hold);
    rec.loss = rec.holdout_loss;
    rec.seconds = et.secs();
    rep.loss_history.push_back(rec.loss);
    rep.records.push_back(rec);
    ++rep.epochs;
    if (conv.update(rec.loss)) {
      rep.converged = true;
      break;
    }
  }
  rep.final_loss = rep.loss_history.empty() ? 0.0 : rep.loss_history.back();
  rep.seconds = stage_timer.secs();
  return rep;
}

// target normalization for the regression head; the scale guards against a
// constant target column, which the R2 metric downstream cannot handle
// either.
std::pair<float, float> target_norm_of(const std::vector<float>& targets) {
  double mean = 0.0;
  for (float v : targets) mean += v;
  mean /= targets.size();
  double var = 0.0;
  for (float v : targets) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / targets.size());
  if (sd < 1e-9) fail(ErrCode::value_error, "regression targets are constant");
  return {(float)mean, (float)sd};
}

std::vector<float> normalize_targets(const std::vector<float>& t, float mean, float scale) {
  std::vector<float> out(t.size());
  for (size_t i = 0; i < t.size(); ++i) out[i] = (t[i] - mean) / scale;
  return out;
}

} // namespace

// ------------------------------------------------------- data preparation

std::pair<Dataset, Dataset> class_balance_resample(const Dataset& a, const Dataset& b,
                                                   uint64_t seed) {
  if (!a.has_labels() || !b.has_labels())
    fail(ErrCode::value_error, "class_balance_resample: both datasets must be labeled");
  auto ra = rows_by_class(a.labels, 0);
  auto rb = rows_by_class(b.labels, 0);
  const size_t C = std::max(ra.size(), rb.size());
  ra.resize(C);
  rb.resize(C);
  for (size_t k = 0; k < C; ++k)
    if (ra[k].empty() != rb[k].empty())
      fail(ErrCode::missing_class, "class_balance_resample: class " + std::to_string(k) +
                                       " is present in only one of the datasets");

  Dataset outa = a, outb = b;
  for (size_t k = 0; k < C; ++k) {
    const size_t m = std::max(ra[k].size(), rb[k].size());
    for (int side = 0; side < 2; ++side) {
      const auto& rows = side == 0 ? ra[k] : rb[k];
      const Dataset& src = side == 0 ? a : b;
      Dataset& dst = side == 0 ? outa : outb;
      if (rows.size() == m) continue; // the larger side passes through untouched
      rng::Rng r(rng::derive(seed, rng::tag(side == 0 ? "resample-left" : "resample-right"),
                             (uint64_t)k));
      for (size_t i = rows.size(); i < m; ++i)
        append_row(dst, src, rows[r.below(rows.size())]);
    }
  }
  outa.check();
  outb.check();
  return {std::move(outa), std::move(outb)};
}

Dataset sort_by_class(const Dataset& d) {
  if (!d.has_labels()) fail(ErrCode::value_error, "sort_by_class: dataset has no labels");
  std::vector<int> idx(d.n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int i, int j) { return d.labels[i] < d.labels[j]; });
  Dataset out = d;
  out.samples.clear();
  out.labels.clear();
  out.targets.clear();
  out.n = 0;
  for (int row : idx) append_row(out, d, row);
  return out;
}

std::vector<BatchPair> make_aligned_batches(const Dataset& source, const Dataset& target,
                                            int batch_size, uint64_t seed) {
  if (!source.has_labels() || !target.has_labels())
    fail(ErrCode::value_error, "make_aligned_batches: both datasets must be labeled");
  auto rs = rows_by_class(source.labels, 0);
  auto rt = rows_by_class(target.labels, 0);
  const size_t C = std::max(rs.size(), rt.size());
  rs.resize(C);
  rt.resize(C);
  int observed = 0;
  for (size_t k = 0; k < C; ++k) {
    if (rs[k].size() != rt[k].size())
      fail(ErrCode::value_error, "make_aligned_batches: class " + std::to_string(k) + " has " +
                                     std::to_string(rs[k].size()) + " source but " +
                                     std::to_string(rt[k].size()) +
                                     " target samples; run class_balance_resample first");
    observed += !rs[k].empty();
  }
  if (batch_size < observed)
    fail(ErrCode::bad_config, "make_aligned_batches: batch_size " + std::to_string(batch_size) +
                                  " < class count " + std::to_string(observed));

  // independent per-class pairing shuffles
  for (size_t k = 0; k < C; ++k) {
    rng::Rng a(rng::derive(seed, rng::tag("pair-source"), (uint64_t)k));
    a.shuffle(rs[k]);
    rng::Rng b(rng::derive(seed, rng::tag("pair-target"), (uint64_t)k));
    b.shuffle(rt[k]);
  }

  const size_t M = source.labels.size();
  const size_t nb = (M + batch_size - 1) / batch_size;
  const size_t sdim = source.dim(), tdim = target.dim();

  std::vector<BatchPair> out(nb);
  for (size_t i = 0; i < nb; ++i) {
    BatchPair& bp = out[i];
    bp.source.shape = source.shape;
    bp.target.shape = target.shape;
    for (size_t k = 0; k < C; ++k) {
      const size_t m = rs[k].size();
      if (m == 0) continue;
      // proportional share: rows floor(m*i/nb) .. floor(m*(i+1)/nb) of class k
      const size_t lo = m * i / nb, hi = m * (i + 1) / nb;
      if (hi == lo)
        fail(ErrCode::missing_class, "make_aligned_batches: class " + std::to_string(k) +
                                         " cannot reach every batch (too few samples for " +
                                         std::to_string(nb) + " batches)");
      for (size_t j = lo; j < hi; ++j) {
        const int srow = rs[k][j], trow = rt[k][j];
        bp.source.data.insert(bp.source.data.end(), source.sample(srow),
                              source.sample(srow) + sdim);
        bp.target.data.insert(bp.target.data.end(), target.sample(trow),
                              target.sample(trow) + tdim);
        bp.source_labels.push_back((int)k);
        bp.target_labels.push_back((int)k);
        bp.source_rows.push_back(srow);
        bp.target_rows.push_back(trow);
      }
    }
    bp.source.n = (int)bp.source_labels.size();
    bp.target.n = (int)bp.target_labels.size();
  }
  return out;
}

Batch resize_bilinear(const Batch& in, const Shape3& out_shape) {
  if (in.shape.c != out_shape.c)
    fail(ErrCode::shape_mismatch, "resize_bilinear: channel counts differ");
  Batch out;
  out.shape = out_shape;
  out.n = in.n;
  out.data.resize((size_t)in.n * out_shape.numel());
  const int hi = in.shape.h, wi = in.shape.w, c = in.shape.c;
  const int ho = out_shape.h, wo = out_shape.w;
  for (int s = 0; s < in.n; ++s) {
    const float* src = in.sample(s);
    float* dst = &out.data[(size_t)s * out_shape.numel()];
    for (int y = 0; y < ho; ++y) {
      float fy = ((float)y + 0.5f) * hi / ho - 0.5f;
      fy = std::min(std::max(fy, 0.f), (float)(hi - 1));
      const int y0 = (int)fy, y1 = std::min(y0 + 1, hi - 1);
      const float wy = fy - y0;
      for (int x = 0; x < wo; ++x) {
        float fx = ((float)x + 0.5f) * wi / wo - 0.5f;
        fx = std::min(std::max(fx, 0.f), (float)(wi - 1));
        const int x0 = (int)fx, x1 = std::min(x0 + 1, wi - 1);
        const float wx = fx - x0;
        for (int ch = 0; ch < c; ++ch) {
          const float v00 = src[((size_t)y0 * wi + x0) * c + ch];
          const float v01 = src[((size_t)y0 * wi + x1) * c + ch];
          const float v10 = src[((size_t)y1 * wi + x0) * c + ch];
          const float v11 = src[((size_t)y1 * wi + x1) * c + ch];
          dst[((size_t)y * wo + x) * c + ch] = (1.f - wy) * ((1.f - wx) * v00 + wx * v01) +
                                               wy * ((1.f - wx) * v10 + wx * v11);
        }
      }
    }
  }
  return out;
}

// ------------------------------------------------------------------ stages

StageReport train_stage1_autoencoders(AdaptationModel& model, const Dataset& source,
                                      const Dataset& target_labeled, const TrainingConfig& cfg) {
  if (model.stage1_done) fail(ErrCode::stage_order, "stage 1 already completed on this model");
  require_shape(source, model.source_ae.spec.input_shape, "stage 1 source");
  require_shape(target_labeled, model.target_ae.spec.input_shape, "stage 1 target");
  const int C = num_classes_of(model, source, target_labeled);
  validate(cfg, C);

  Timer stage_timer;
  StageReport rep;
  rep.stage = 1;
  ConvergenceTracker conv(cfg.min_rel_improvement, cfg.patience);
  AdamParams ap;
  ap.lr = cfg.learning_rate;
  int64_t t = 0;
  const int b = model.source_ae.spec.bottleneck_size;
  const int sdim = source.dim(), tdim = target_labeled.dim();
  std::vector<float> gps, gpt, gfs, gft;

  for (int epoch = 0; epoch < cfg.max_epochs_per_stage; ++epoch) {
    Timer et;
    auto batches = make_aligned_batches(
        source, target_labeled, cfg.batch_size,
        rng::derive(cfg.seed, rng::tag("stage1-batches"), (uint64_t)epoch));

    double sum_total = 0.0, sum_ls = 0.0, sum_lt = 0.0, sum_lr = 0.0, sum_cws = 0.0;
    long samples = 0;
    for (BatchPair& bp : batches) {
      const int n = bp.source.n; // == bp.target.n by construction
      const auto& ps = model.source_ae.forward(bp.source.data.data(), n);
      const auto& pt = model.target_ae.forward(bp.target.data.data(), n);
      const Mat& fsm = model.source_ae.bottleneck();
      const Mat& ftm = model.target_ae.bottleneck();

      const float ls =
          reconstruction_bce(bp.source.data.data(), ps.data(), n, sdim, cfg.loss.epsilon);
      const auto [lt, parts] = target_composite_loss(
          bp.target.data.data(), pt.data(), n, tdim, fsm.data.data(), bp.source_labels,
          ftm.data.data(), bp.target_labels, b, C, cfg.loss);
      const double total = (double)ls + (double)lt;
      if (!std::isfinite(total))
        fail(ErrCode::divergence,
             "stage 1 loss became non-finite at epoch " + std::to_string(epoch));

      gps.resize((size_t)n * sdim);
      gpt.resize((size_t)n * tdim);
      gfs.resize((size_t)n * b);
      gft.resize((size_t)n * b);
      reconstruction_bce_grad(bp.source.data.data(), ps.data(), n, sdim, cfg.loss.epsilon,
                              gps.data());
      target_composite_grad(bp.target.data.data(), pt.data(), n, tdim, fsm.data.data(),
                            bp.source_labels, ftm.data.data(), bp.target_labels, b, C, cfg.loss,
                            gpt.data(), gfs.data(), gft.data());

      // one combined step over the bridged graph: both gradient sets are
      // computed from pre-step parameters, then both sides update.
      const float* bneck_s =
          cfg.cws_grad == TrainingConfig::CwsGrad::both ? gfs.data() : nullptr;
      model.source_ae.backward(gps.data(), bneck_s, n);
      model.target_ae.backward(gpt.data(), gft.data(), n);
      ++t;
      model.source_ae.step(ap, t);
      model.target_ae.step(ap, t);

      sum_total += total * n;
      sum_ls += (double)ls * n;
      sum_lt += (double)lt * n;
      sum_lr += (double)parts.recon * n;
      sum_cws += (double)parts.cws * n;
      samples += n;
    }

    EpochRecord rec;
    rec.loss = sum_total / samples;
    rec.source_bce = sum_ls / samples;
    rec.target_total = sum_lt / samples;
    rec.target_recon = sum_lr / samples;
    rec.target_cws = sum_cws / samples;
    rec.seconds = et.secs();
    rep.loss_history.push_back(rec.loss);
    rep.records.push_back(rec);
    ++rep.epochs;
    if (conv.update(rec.loss)) {
      rep.converged = true;
      break;
    }
  }
  rep.final_loss = rep.loss_history.empty() ? 0.0 : rep.loss_history.back();
  rep.seconds = stage_timer.secs();
  model.stage1_done = true;
  return rep;
}

StageReport train_stage2_classifier(AdaptationModel& model, const Dataset& source,
                                    const TrainingConfig& cfg) {
  if (!model.stage1_done) fail(ErrCode::stage_order, "stage 2 requires a completed stage 1");
  if (model.stage2_done) fail(ErrCode::stage_order, "stage 2 already completed on this model");
  require_shape(source, model.source_ae.spec.input_shape, "stage 2");
  if (!source.has_labels()) fail(ErrCode::value_error, "stage 2: source dataset has no labels");
  const int C = num_classes_of(model, source, source);
  validate(cfg, 0);

  // "randomly initialize the classifier": fresh head, frozen encoders.
  model.head.reinit(rng::derive(cfg.seed, rng::tag("stage2-head")));

  const Mat feats =
      encode_dataset(model.source_ae, source.samples.data(), source.n, cfg.batch_size);

  std::vector<float> norm;
  if (model.head.spec.kind == HeadSpec::Kind::linear_regressor) {
    if (!source.has_targets())
      fail(ErrCode::value_error, "stage 2: regression needs targets on the source dataset");
    const auto [mean, scale] = target_norm_of(source.targets);
    model.target_mean = mean;
    model.target_scale = scale;
    norm = normalize_targets(source.targets, mean, scale);
  }

  StageReport rep = train_head_on_features(model.head, feats, source.labels, norm, C, cfg, 2,
                                           rng::derive(cfg.seed, rng::tag("stage2")));
  model.stage2_done = true;
  return rep;
}

StageReport train_stage3_finetune(AdaptationModel& model, const Dataset& target_labeled,
                                  const TrainingConfig& cfg) {
  if (!model.stage1_done || !model.stage2_done)
    fail(ErrCode::stage_order, "stage 3 requires completed stages 1 and 2");
  if (model.stage3_done) fail(ErrCode::stage_order, "stage 3 already completed on this model");
  require_shape(target_labeled, model.target_ae.spec.input_shape, "stage 3");
  if (!target_labeled.has_labels())
    fail(ErrCode::value_error, "stage 3: labeled target dataset has no labels");
  const int C = num_classes_of(model, target_labeled, target_labeled);
  validate(cfg, 0);
  {
    auto rows = rows_by_class(target_labeled.labels, C);
    for (int k = 0; k < C; ++k)
      if (rows[k].empty())
        fail(ErrCode::missing_class,
             "stage 3: class " + std::to_string(k) + " has no labeled target samples");
  }

  // The head continues from its stage-2 weights (that is the transfer), but
  // the optimizer restarts: stale source-domain moments would fight the new
  // objective.
  model.head.reset_optimizer();

  const Mat feats = encode_dataset(model.target_ae, target_labeled.samples.data(),
                                   target_labeled.n, cfg.batch_size);

  std::vector<float> norm;
  if (model.head.spec.kind == HeadSpec::Kind::linear_regressor) {
    if (!target_labeled.has_targets())
      fail(ErrCode::value_error, "stage 3: regression needs targets on the labeled target set");
    // stage-2 normalization carries over; refitting it would silently shift
    // the head's output scale between stages.
    norm = normalize_targets(target_labeled.targets, model.target_mean, model.target_scale);
  }

  StageReport rep = train_head_on_features(model.head, feats, target_labeled.labels, norm, C,
                                           cfg, 3, rng::derive(cfg.seed, rng::tag("stage3")));
  model.stage3_done = true;
  return rep;
}

Predictions predict(AdaptationModel& model, const Dataset& data, bool require_complete) {
  if (!model.stage1_done || !model.stage2_done || (require_complete && !model.stage3_done))
    fail(ErrCode::stage_order, "predict: training stages are incomplete");
  if (data.n == 0) return {};
  return predict_impl(model.target_ae, model.head, data.samples.data(), data.n, data.shape,
                      model.target_mean, model.target_scale);
}

// ------------------------------------------------------------- full runs

namespace {

void append_stage_log(std::ofstream& log, const StageReport& rep) {
  if (!log.is_open()) return;
  for (int e = 0; e < rep.epochs; ++e) {
    const EpochRecord& r = rep.records[e];
    json parts;
    if (rep.stage == 1)
      parts = {{"source_bce", r.source_bce},
               {"target_total", r.target_total},
               {"target_recon", r.target_recon},
               {"target_cws", r.target_cws}};
    else
      parts = {{"train_loss", r.train_loss}, {"holdout_loss", r.holdout_loss}};
    const json line = {
        {"stage", rep.stage}, {"epoch", e}, {"loss", r.loss}, {"parts", parts},
        {"seconds", r.seconds}};
    log << line.dump() << "\n";
  }
  log.flush();
}

void write_checkpoint(AdaptationModel& model, const std::string& dir, int stage) {
  if (dir.empty()) return;
  save_model(model, (fs::path(dir) / ("stage" + std::to_string(stage))).string());
}

} // namespace

PipelineResult run_full_pipeline(const Dataset& source, const Dataset& target_labeled,
                                 const Dataset& target_unlabeled,
                                 const AutoencoderSpec& source_spec,
                                 const AutoencoderSpec& target_spec, const HeadSpec& head_spec,
                                 const TrainingConfig& cfg, const PipelineOptions& opt) {
  // b and the classifier widths are training inputs; they override the specs.
  AutoencoderSpec sspec = source_spec, tspec = target_spec;
  sspec.bottleneck_size = cfg.bottleneck_size;
  tspec.bottleneck_size = cfg.bottleneck_size;
  HeadSpec hspec = head_spec;
  hspec.hidden = cfg.classifier_hidden;
  validate(sspec);
  validate(tspec);
  validate(hspec);

  int first = 1;
  if (opt.resume == "stage2")
    first = 2;
  else if (opt.resume == "stage3")
    first = 3;
  else if (!opt.resume.empty() && opt.resume != "stage1")
    fail(ErrCode::bad_config, "resume: expected stage1, stage2, or stage3, got '" + opt.resume +
                                  "'");

  AdaptationModel model;
  if (first == 1) {
    model = build_adaptation_model(sspec, tspec, hspec, cfg.seed);
  } else {
    if (opt.checkpoint_dir.empty())
      fail(ErrCode::bad_config, "resume requires a checkpoint directory");
    const std::string prev =
        (fs::path(opt.checkpoint_dir) / ("stage" + std::to_string(first - 1))).string();
    model = load_model(prev, &hspec.kind); // hash-verified inside the loader
    if ((first >= 2 && !model.stage1_done) || (first >= 3 && !model.stage2_done))
      fail(ErrCode::stage_order, "resume: checkpoint " + prev + " has incomplete stages");
    if (!(model.source_ae.spec == sspec) || !(model.target_ae.spec == tspec) ||
        !(model.head.spec == hspec))
      fail(ErrCode::bad_config, "resume: checkpoint specs differ from the requested run");
  }

  const int C = num_classes_of(model, source, target_labeled);
  validate(cfg, C);

  // Class-balance the two labeled splits against each other, then sort.
  auto [bal_s, bal_t] =
      class_balance_resample(source, target_labeled, rng::derive(cfg.seed, rng::tag("resample")));
  const Dataset prep_source = sort_by_class(bal_s);
  const Dataset prep_target = sort_by_class(bal_t);

  std::ofstream log;
  if (!opt.checkpoint_dir.empty()) {
    std::error_code ec;
    fs::create_directories(opt.checkpoint_dir, ec);
    if (ec) fail(ErrCode::io_error, "cannot create " + opt.checkpoint_dir);
    log.open(fs::path(opt.checkpoint_dir) / "training_log.jsonl",
             first > 1 ? std::ios::app : std::ios::trunc);
    if (!log) fail(ErrCode::io_error, "cannot write training_log.jsonl");
  }

  PipelineResult res;
  if (first <= 1) {
    res.stage1 = train_stage1_autoencoders(model, prep_source, prep_target, cfg);
    write_checkpoint(model, opt.checkpoint_dir, 1);
    append_stage_log(log, res.stage1);
    if (opt.stop_after == 1) {
      res.model = std::move(model);
      return res;
    }
  }
  if (first <= 2) {
    res.stage2 = train_stage2_classifier(model, prep_source, cfg);
    write_checkpoint(model, opt.checkpoint_dir, 2);
    append_stage_log(log, res.stage2);
    if (opt.stop_after == 2) {
      res.model = std::move(model);
      return res;
    }
  }
  if (!opt.skip_stage3) {
    // fine-tuning sees the labeled target set as collected (no upsampling:
    // repeated rows would leak into the holdout and stall convergence).
    res.stage3 = train_stage3_finetune(model, target_labeled, cfg);
    write_checkpoint(model, opt.checkpoint_dir, 3);
    append_stage_log(log, res.stage3);
  }
  res.predictions = predict(model, target_unlabeled, !opt.skip_stage3);
  res.model = std::move(model);
  return res;
}

Predictions source_only_baseline(const Dataset& source, const Dataset& target_unlabeled,
                                 const AutoencoderSpec& source_spec, const HeadSpec& head_spec,
                                 const TrainingConfig& cfg) {
  AutoencoderSpec sspec = source_spec;
  sspec.bottleneck_size = cfg.bottleneck_size;
  HeadSpec hspec = head_spec;
  hspec.hidden = cfg.classifier_hidden;
  validate(sspec);
  validate(hspec);
  validate(cfg, 0);
  require_shape(source, sspec.input_shape, "baseline");
  if (!source.has_labels()) fail(ErrCode::value_error, "baseline: source dataset has no labels");

  // Same init stream as the adaptation model's source side, so the baseline
  // differs from SAEDA only in what it trains on.
  Autoencoder ae = build_autoencoder(sspec, rng::derive(cfg.seed, rng::tag("source-ae")));

  AdamParams ap;
  ap.lr = cfg.learning_rate;
  ConvergenceTracker conv(cfg.min_rel_improvement, cfg.patience);
  int64_t t = 0;
  const int sdim = source.dim();
  std::vector<int> order(source.n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<float> xb, gp;
  for (int epoch = 0; epoch < cfg.max_epochs_per_stage; ++epoch) {
    rng::Rng shuf(rng::derive(cfg.seed, rng::tag("baseline-epoch"), (uint64_t)epoch));
    shuf.shuffle(order);
    double sum = 0.0;
    for (size_t start = 0; start < order.size(); start += (size_t)cfg.batch_size) {
      const int m = (int)std::min((size_t)cfg.batch_size, order.size() - start);
      xb.resize((size_t)m * sdim);
      for (int i = 0; i < m; ++i)
        std::memcpy(&xb[(size_t)i * sdim], source.sample(order[start + i]),
                    (size_t)sdim * sizeof(float));
      const auto& p = ae.forward(xb.data(), m);
      const float loss = reconstruction_bce(xb.data(), p.data(), m, sdim, cfg.loss.epsilon);
      if (!std::isfinite(loss))
        fail(ErrCode::divergence, "baseline auto-encoder loss became non-finite");
      gp.resize((size_t)m * sdim);
      reconstruction_bce_grad(xb.data(), p.data(), m, sdim, cfg.loss.epsilon, gp.data());
      ae.backward(gp.data(), nullptr, m);
      ++t;
      ae.step(ap, t);
      sum += (double)loss * m;
    }
    if (conv.update(sum / source.n)) break;
  }

  Head head = build_head(hspec, sspec.bottleneck_size, rng::derive(cfg.seed, rng::tag("head")));
  head.reinit(rng::derive(cfg.seed, rng::tag("stage2-head")));
  const Mat feats = encode_dataset(ae, source.samples.data(), source.n, cfg.batch_size);

  int C = hspec.output_size;
  if (hspec.kind == HeadSpec::Kind::linear_regressor) {
    C = (int)source.class_names.size();
    for (int l : source.labels) C = std::max(C, l + 1);
  }
  float tmean = 0.f, tscale = 1.f;
  std::vector<float> norm;
  if (hspec.kind == HeadSpec::Kind::linear_regressor) {
    if (!source.has_targets())
      fail(ErrCode::value_error, "baseline: regression needs targets on the source dataset");
    std::tie(tmean, tscale) = target_norm_of(source.targets);
    norm = normalize_targets(source.targets, tmean, tscale);
  }
  train_head_on_features(head, feats, source.labels, norm, C, cfg, 2,
                         rng::derive(cfg.seed, rng::tag("stage2")));

  // No adaptation: target samples are pushed through the SOURCE encoder
  // after a bilinear resize to its grid.
  Batch tb;
  tb.shape = target_unlabeled.shape;
  tb.n = target_unlabeled.n;
  tb.data = target_unlabeled.samples;
  const Batch resized = resize_bilinear(tb, sspec.input_shape);
  return predict_impl(ae, head, resized.data.data(), resized.n, resized.shape, tmean, tscale);
}

} // namespace saeda
