#include "saeda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "saeda/errors.hpp"

namespace saeda {

namespace {

using json = nlohmann::json;

void check_paired(size_t n_true, size_t n_pred, const char* what) {
  if (n_true != n_pred)
    fail(ErrCode::shape_mismatch, std::string(what) + ": y_true has " + std::to_string(n_true) +
                                      " entries, y_pred has " + std::to_string(n_pred));
  if (n_true == 0) fail(ErrCode::shape_mismatch, std::string(what) + ": empty input");
}

// per-class feature centroids, double precision; every class must appear
std::vector<std::vector<double>> centroids(const Mat& feats, const std::vector<int>& labels,
                                           int num_classes, const char* side) {
  if ((size_t)feats.rows != labels.size())
    fail(ErrCode::shape_mismatch, std::string("alignment: ") + side + " features and labels disagree");
  std::vector<std::vector<double>> mu(num_classes, std::vector<double>(feats.cols, 0.0));
  std::vector<long long> count(num_classes, 0);
  for (int i = 0; i < feats.rows; ++i) {
    const int k = labels[i];
    if (k < 0 || k >= num_classes)
      fail(ErrCode::value_error, std::string("alignment: ") + side + " label " + std::to_string(k) +
                                     " outside [0, " + std::to_string(num_classes) + ")");
    for (int j = 0; j < feats.cols; ++j) mu[k][j] += feats.at(i, j);
    ++count[k];
  }
  for (int k = 0; k < num_classes; ++k) {
    if (count[k] == 0)
      fail(ErrCode::missing_class,
           std::string("alignment: class ") + std::to_string(k) + " has no " + side + " samples");
    for (double& v : mu[k]) v /= count[k];
  }
  return mu;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// encoder output for a whole dataset, evaluated in fixed-size chunks so the
// activation buffers stay small no matter how many samples arrive
Mat encode_chunked(Autoencoder& ae, const Dataset& d) {
  constexpr int kChunk = 64;
  Mat out;
  for (int i = 0; i < d.n; i += kChunk) {
    const int m = std::min(kChunk, d.n - i);
    const Mat z = ae.encode(d.sample(i), m);
    if (out.rows == 0) {
      out.rows = d.n;
      out.cols = z.cols;
      out.data.assign((size_t)d.n * z.cols, 0.f);
    }
    std::copy(z.data.begin(), z.data.end(), out.data.begin() + (size_t)i * out.cols);
  }
  return out;
}

Autoencoder& encoder_for(AdaptationModel& model, const Dataset& d) {
  Autoencoder& ae = d.split == SplitTag::source ? model.source_ae : model.target_ae;
  if (!(d.shape == ae.spec.input_shape))
    fail(ErrCode::shape_mismatch, "dataset shape does not match its modality's encoder");
  return ae;
}

// cyclic Jacobi eigensolver for a symmetric matrix (row-major, size d).
// On return `a` holds the eigenvalues on its diagonal and `V`'s column j is
// the j-th eigenvector. Deterministic: fixed sweep order, fixed tolerance.
void jacobi_eigen(std::vector<double>& a, int d, std::vector<double>& V) {
  V.assign((size_t)d * d, 0.0);
  for (int i = 0; i < d; ++i) V[(size_t)i * d + i] = 1.0;
  auto A = [&](int r, int c) -> double& { return a[(size_t)r * d + c]; };
  auto Vat = [&](int r, int c) -> double& { return V[(size_t)r * d + c]; };

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-24) break;

    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double tau = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int i = 0; i < d; ++i) { // rotate rows/columns p and q of A
          const double aip = A(i, p), aiq = A(i, q);
          A(i, p) = c * aip - s * aiq;
          A(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < d; ++i) {
          const double api = A(p, i), aqi = A(q, i);
          A(p, i) = c * api - s * aqi;
          A(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < d; ++i) {
          const double vip = Vat(i, p), viq = Vat(i, q);
          Vat(i, p) = c * vip - s * viq;
          Vat(i, q) = s * vip + c * viq;
        }
      }
    }
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary); // binary: no platform newline games
  if (!out) fail(ErrCode::io_error, "cannot open for writing: " + path);
  return out;
}

json confusion_to_json(const Confusion& c) {
  json rows = json::array();
  for (int t = 0; t < c.classes; ++t) {
    json row = json::array();
    for (int p = 0; p < c.classes; ++p) row.push_back(c.at(t, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace

long long Confusion::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0LL);
}

long long Confusion::trace() const {
  long long s = 0;
  for (int k = 0; k < classes; ++k) s += at(k, k);
  return s;
}

ClassificationMetrics classification_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred, int num_classes) {
  check_paired(y_true.size(), y_pred.size(), "classification_metrics");
  if (num_classes < 1) fail(ErrCode::bad_config, "classification_metrics: num_classes must be >= 1");
  ClassificationMetrics m;
  m.confusion = Confusion(num_classes);
  for (size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      fail(ErrCode::value_error, "classification_metrics: label outside [0, " +
                                     std::to_string(num_classes) + ") at index " +
                                     std::to_string(i));
    ++m.confusion.at(t, p);
  }
  m.accuracy = (double)m.confusion.trace() / (double)y_true.size();
  return m;
}

double r_squared(const std::vector<float>& y_true, const std::vector<float>& y_pred) {
  check_paired(y_true.size(), y_pred.size(), "r_squared");
  if (y_true.size() < 2) fail(ErrCode::value_error, "r_squared: needs at least 2 samples");
  double mean = 0;
  for (float v : y_true) mean += v;
  mean /= y_true.size();
  double ss_res = 0, ss_tot = 0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    const double r = (double)y_true[i] - y_pred[i];
    const double c = (double)y_true[i] - mean;
    ss_res += r * r;
    ss_tot += c * c;
  }
  if (ss_tot < 1e-12)
    fail(ErrCode::value_error, "r_squared: y_true is constant, variance undefined");
  return 1.0 - ss_res / ss_tot;
}

double mean_squared_error(const std::vector<float>& y_true, const std::vector<float>& y_pred) {
  check_paired(y_true.size(), y_pred.size(), "mean_squared_error");
  double s = 0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    const double d = (double)y_true[i] - y_pred[i];
    s += d * d;
  }
  return s / y_true.size();
}

AlignmentDiagnostic alignment_diagnostic(const Mat& source, const std::vector<int>& source_labels,
                                         const Mat& target, const std::vector<int>& target_labels,
                                         int num_classes) {
  if (num_classes < 2) fail(ErrCode::bad_config, "alignment: needs at least 2 classes");
  if (source.cols != target.cols)
    fail(ErrCode::shape_mismatch, "alignment: feature widths disagree (" +
                                      std::to_string(source.cols) + " vs " +
                                      std::to_string(target.cols) + ")");
  const auto mu_s = centroids(source, source_labels, num_classes, "source");
  const auto mu_t = centroids(target, target_labels, num_classes, "target");

  AlignmentDiagnostic d;
  for (int k = 0; k < num_classes; ++k) d.matched += sq_dist(mu_s[k], mu_t[k]);
  d.matched /= num_classes;
  for (int k = 0; k < num_classes; ++k)
    for (int j = 0; j < num_classes; ++j)
      if (j != k) d.mismatched += sq_dist(mu_s[k], mu_t[j]);
  d.mismatched /= (double)num_classes * (num_classes - 1);
  return d;
}

AlignmentDiagnostic alignment_diagnostic(AdaptationModel& model, const Dataset& source,
                                         const Dataset& target) {
  if (!source.has_labels() || !target.has_labels())
    fail(ErrCode::value_error, "alignment: both datasets must be labeled");
  int num_classes = 0;
  for (int l : source.labels) num_classes = std::max(num_classes, l + 1);
  for (int l : target.labels) num_classes = std::max(num_classes, l + 1);
  const Mat fs = encode_chunked(model.source_ae, source);
  const Mat ft = encode_chunked(model.target_ae, target);
  return alignment_diagnostic(fs, source.labels, ft, target.labels, num_classes);
}

Mat project_top2(const Mat& features) {
  const int n = features.rows, d = features.cols;
  if (n < 3) fail(ErrCode::value_error, "embedding: needs at least 3 samples");
  if (d < 2) fail(ErrCode::value_error, "embedding: needs at least 2 feature dimensions");

  std::vector<double> mean(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) mean[j] += features.at(i, j);
  for (double& v : mean) v /= n;

  // covariance of the centered features
  std::vector<double> cov((size_t)d * d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) {
      const double xa = features.at(i, a) - mean[a];
      for (int b = a; b < d; ++b) cov[(size_t)a * d + b] += xa * (features.at(i, b) - mean[b]);
    }
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      cov[(size_t)a * d + b] /= (n - 1);
      cov[(size_t)b * d + a] = cov[(size_t)a * d + b];
    }

  std::vector<double> V;
  jacobi_eigen(cov, d, V);

  // two largest eigenvalues; ties resolve to the lower index
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return cov[(size_t)a * d + a] > cov[(size_t)b * d + b];
  });

  std::vector<std::vector<double>> axes(2, std::vector<double>(d));
  for (int c = 0; c < 2; ++c) {
    const int j = order[c];
    for (int i = 0; i < d; ++i) axes[c][i] = V[(size_t)i * d + j];
    for (int i = 0; i < d; ++i) { // pin the sign: first nonzero loading positive
      if (std::abs(axes[c][i]) > 1e-12) {
        if (axes[c][i] < 0)
          for (double& v : axes[c]) v = -v;
        break;
      }
    }
  }

  Mat out;
  out.rows = n;
  out.cols = 2;
  out.data.resize((size_t)n * 2);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c) {
      double s = 0;
      for (int j = 0; j < d; ++j) s += (features.at(i, j) - mean[j]) * axes[c][j];
      out.at(i, c) = (float)s;
    }
  return out;
}

Embedding export_embedding(AdaptationModel& model, const Dataset& data, EmbeddingMethod method) {
  (void)method; // linear_2d is the only member; the enum keeps the call sites explicit
  Embedding e;
  e.coords = project_top2(encode_chunked(encoder_for(model, data), data));
  if (data.has_labels()) e.labels = data.labels;
  return e;
}

double separation_ratio(const Mat& points, const std::vector<int>& labels, int num_classes) {
  const auto mu = centroids(points, labels, num_classes, "embedding");
  double between = 0;
  int pairs = 0;
  for (int k = 0; k < num_classes; ++k)
    for (int j = k + 1; j < num_classes; ++j) {
      between += std::sqrt(sq_dist(mu[k], mu[j]));
      ++pairs;
    }
  if (pairs == 0) fail(ErrCode::bad_config, "separation_ratio: needs at least 2 classes");
  between /= pairs;

  double within = 0;
  for (int i = 0; i < points.rows; ++i) {
    const auto& c = mu[labels[i]];
    double s = 0;
    for (int j = 0; j < points.cols; ++j) {
      const double d = points.at(i, j) - c[j];
      s += d * d;
    }
    within += std::sqrt(s);
  }
  within /= points.rows;
  if (within < 1e-12)
    fail(ErrCode::value_error, "separation_ratio: degenerate spread (all points coincide)");
  return between / within;
}

void write_report_json(const EvalReport& report, const std::string& path) {
  json j;
  j["task"] = report.task;
  if (report.task == "classification") {
    j["accuracy"] = report.accuracy;
    j["confusion"] = confusion_to_json(report.confusion);
    j["num_classes"] = report.confusion.classes;
    if (!report.class_names.empty()) j["class_names"] = report.class_names;
  } else {
    j["r_squared"] = report.r_squared;
    j["mse"] = report.mse;
  }
  if (report.has_alignment) {
    j["alignment"] = {{"matched", report.alignment.matched},
                      {"mismatched", report.alignment.mismatched}};
  }
  auto out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) fail(ErrCode::io_error, "write failed: " + path);
}

void write_confusion_csv(const Confusion& confusion, const std::vector<std::string>& class_names,
                         const std::string& path) {
  const int c = confusion.classes;
  auto name = [&](int k) {
    return k < (int)class_names.size() ? class_names[k] : "class_" + std::to_string(k);
  };
  auto out = open_out(path);
  out << "label";
  for (int p = 0; p < c; ++p) out << ',' << name(p);
  out << '\n';
  for (int t = 0; t < c; ++t) {
    out << name(t);
    for (int p = 0; p < c; ++p) out << ',' << confusion.at(t, p);
    out << '\n';
  }
  if (!out) fail(ErrCode::io_error, "write failed: " + path);
}

void write_embedding_csv(const Mat& coords, const std::vector<int>& labels,
                         const std::string& path) {
  if (coords.cols != 2) fail(ErrCode::shape_mismatch, "embedding csv: coordinates must be n x 2");
  if (!labels.empty() && (int)labels.size() != coords.rows)
    fail(ErrCode::shape_mismatch, "embedding csv: label count disagrees with coordinates");
  auto out = open_out(path);
  out << "x,y,label\n";
  char buf[64];
  for (int i = 0; i < coords.rows; ++i) {
    const int label = labels.empty() ? -1 : labels[i];
    // %.9g round-trips float exactly
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%d\n", coords.at(i, 0), coords.at(i, 1), label);
    out << buf;
  }
  if (!out) fail(ErrCode::io_error, "write failed: " + path);
}

} // namespace saeda
