#pragma once
// eval.hpp — metrics and diagnostics computed after (or between) training
// stages: classification accuracy + confusion matrix, R²/MSE for the
// regression variant, the matched/mismatched class-centroid discrepancy that
// quantifies how well the two bottleneck spaces line up, and a deterministic
// 2-D projection of bottleneck features for visual inspection.
//
// Everything here is a pure function over immutable inputs; all reductions
// accumulate in double regardless of the storage type.

#include <string>
#include <utility>
#include <vector>

#include "saeda/dataset.hpp"
#include "saeda/model.hpp"
#include "saeda/tensor.hpp"

namespace saeda {

// Row-major C×C count matrix; rows index the true label, columns the
// predicted one.
struct Confusion {
  int classes = 0;
  std::vector<long long> counts;

  explicit Confusion(int c = 0) : classes(c), counts((size_t)c * c, 0) {}
  long long& at(int t, int p) { return counts[(size_t)t * classes + p]; }
  long long at(int t, int p) const { return counts[(size_t)t * classes + p]; }
  long long total() const;
  long long trace() const;
  bool operator==(const Confusion&) const = default;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  Confusion confusion;
};

// Accuracy and confusion counts over paired label vectors.
// Throws shape_mismatch on unequal lengths / empty input and value_error if
// any label falls outside [0, num_classes).
ClassificationMetrics classification_metrics(const std::vector<int>& y_true,
                                             const std::vector<int>& y_pred, int num_classes);

// Coefficient of determination, 1 − SS_res/SS_tot. Needs at least two
// samples and a non-constant y_true (otherwise the total sum of squares is
// zero and the quotient is undefined → value_error). Always ≤ 1; equals 1
// exactly when every residual is zero.
double r_squared(const std::vector<float>& y_true, const std::vector<float>& y_pred);

// Mean squared error over paired vectors (non-negative).
double mean_squared_error(const std::vector<float>& y_true, const std::vector<float>& y_pred);

// How well the two feature spaces are aligned, class by class:
//   matched    = mean over classes k of ‖μ_s(k) − μ_t(k)‖²
//   mismatched = mean over ordered pairs k ≠ j of ‖μ_s(k) − μ_t(j)‖²
// where μ_s/μ_t are per-class feature centroids of the two sides. A trained
// adaptation drives matched well below mismatched; with untrained encoders
// the two come out comparable. Swapping the two sides leaves both values
// unchanged (the pair set is closed under transposition).
struct AlignmentDiagnostic {
  double matched = 0.0;
  double mismatched = 0.0;
};

// Feature-level core: rows of `source` / `target` are feature vectors with
// per-row labels. Every class in [0, num_classes) must appear on both sides
// (missing_class otherwise); feature widths must agree (shape_mismatch).
AlignmentDiagnostic alignment_diagnostic(const Mat& source, const std::vector<int>& source_labels,
                                         const Mat& target, const std::vector<int>& target_labels,
                                         int num_classes);

// Model-level wrapper: encodes `source` with the source encoder and `target`
// with the target encoder, then runs the feature-level diagnostic. Callable
// on a freshly built model too — that is how the pre-adaptation reference
// point is measured. Both datasets must be labeled.
AlignmentDiagnostic alignment_diagnostic(AdaptationModel& model, const Dataset& source,
                                         const Dataset& target);

// Deterministic linear 2-D projection: features are centered and projected
// onto their top-2 principal directions. The eigenvector sign is pinned by
// forcing the first nonzero loading of each direction positive, so repeated
// runs and reloaded models produce identical coordinates. Requires at least
// 3 rows and at least 2 feature columns (value_error otherwise).
enum class EmbeddingMethod { linear_2d };

Mat project_top2(const Mat& features);

// Encodes the dataset with the encoder matching its split tag (source split
// → source encoder, target splits → target encoder) and projects the
// bottleneck features. `labels` in the result copies the dataset's labels
// when present and is empty otherwise.
struct Embedding {
  Mat coords; // n × 2
  std::vector<int> labels;
};

Embedding export_embedding(AdaptationModel& model, const Dataset& data,
                           EmbeddingMethod method = EmbeddingMethod::linear_2d);

// Cluster-quality score for a labeled point set: mean pairwise distance
// between class centroids divided by the mean distance of a point to its own
// class centroid. Bigger is better separated. Throws missing_class if a
// class in [0, num_classes) has no points and value_error when the spread is
// degenerate (all points of every class coincide).
double separation_ratio(const Mat& points, const std::vector<int>& labels, int num_classes);

// ---------------------------------------------------------------------------
// Report assembly + artifact writers
// ---------------------------------------------------------------------------

// One evaluation run's scalar results. `task` decides which block is
// meaningful; the alignment block is optional on top of either task.
struct EvalReport {
  std::string task; // "classification" | "regression"

  double accuracy = 0.0; // classification block
  Confusion confusion;
  std::vector<std::string> class_names;

  double r_squared = 0.0; // regression block
  double mse = 0.0;

  bool has_alignment = false;
  AlignmentDiagnostic alignment;
};

// report.json: every scalar metric plus the confusion counts, keys sorted,
// two-space indent — byte-stable across runs for identical inputs.
void write_report_json(const EvalReport& report, const std::string& path);

// confusion.csv: header `label,<name_0>,...`; one row per true class with
// its predicted counts. Falls back to class_<k> names when none are given.
void write_confusion_csv(const Confusion& confusion, const std::vector<std::string>& class_names,
                         const std::string& path);

// embedding.csv: header `x,y,label`; coordinates are printed with enough
// digits to round-trip float exactly. An empty label vector writes −1.
void write_embedding_csv(const Mat& coords, const std::vector<int>& labels,
                         const std::string& path);

} // namespace saeda
