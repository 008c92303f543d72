#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "saeda/datagen.hpp"
#include "saeda/errors.hpp"
#include "saeda/eval.hpp"

using namespace saeda;
namespace fs = std::filesystem;

namespace {

// ---- independent references ------------------------------------------------

double naive_accuracy(const std::vector<int>& t, const std::vector<int>& p) {
  int hit = 0;
  for (size_t i = 0; i < t.size(); ++i) hit += t[i] == p[i];
  return (double)hit / t.size();
}

double naive_r2(const std::vector<float>& t, const std::vector<float>& p) {
  double mean = 0;
  for (float v : t) mean += v;
  mean /= t.size();
  double res = 0, tot = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    res += ((double)t[i] - p[i]) * ((double)t[i] - p[i]);
    tot += ((double)t[i] - mean) * ((double)t[i] - mean);
  }
  return 1.0 - res / tot;
}

Mat make_mat(int rows, int cols, std::vector<float> v) {
  Mat m;
  m.rows = rows;
  m.cols = cols;
  m.data = std::move(v);
  return m;
}

Mat random_mat(int rows, int cols, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> g(0.f, 1.f);
  Mat m;
  m.rows = rows;
  m.cols = cols;
  m.data.resize((size_t)rows * cols);
  for (float& v : m.data) v = g(rng);
  return m;
}

double dist2d(const Mat& m, int a, int b) {
  const double dx = m.at(a, 0) - m.at(b, 0), dy = m.at(a, 1) - m.at(b, 1);
  return std::sqrt(dx * dx + dy * dy);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("classification_metrics matches a direct count on random labels") {
  std::mt19937 rng(7);
  const int C = 6, n = 1000;
  std::uniform_int_distribution<int> pick(0, C - 1);
  std::vector<int> t(n), p(n);
  for (int i = 0; i < n; ++i) {
    t[i] = pick(rng);
    p[i] = pick(rng);
  }
  const ClassificationMetrics m = classification_metrics(t, p, C);
  CHECK(m.accuracy == doctest::Approx(naive_accuracy(t, p)).epsilon(1e-12));
  CHECK(m.confusion.total() == n);
  CHECK(m.accuracy == doctest::Approx((double)m.confusion.trace() / n));
  // row sums reproduce the per-class true counts
  for (int k = 0; k < C; ++k) {
    long long row = 0, want = 0;
    for (int j = 0; j < C; ++j) row += m.confusion.at(k, j);
    for (int v : t) want += v == k;
    CHECK(row == want);
  }
}

TEST_CASE("classification_metrics edge cases") {
  const std::vector<int> t = {0, 1, 2, 3};
  SUBCASE("perfect prediction: accuracy 1, diagonal confusion") {
    const ClassificationMetrics m = classification_metrics(t, t, 4);
    CHECK(m.accuracy == 1.0);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) CHECK(m.confusion.at(a, b) == (a == b ? 1 : 0));
  }
  SUBCASE("constant prediction on uniform truth: accuracy 1/C") {
    const std::vector<int> p = {0, 0, 0, 0};
    CHECK(classification_metrics(t, p, 4).accuracy == doctest::Approx(0.25));
  }
  SUBCASE("label == C is out of range") {
    CHECK_THROWS_AS(classification_metrics(t, {0, 1, 2, 4}, 4), Error);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(classification_metrics(t, {0, 1}, 4), Error);
  }
}

TEST_CASE("r_squared matches the naive formula and honors its bounds") {
  SUBCASE("hand case: y_true (0,2,4), y_pred (0,2,3) -> 0.875") {
    const std::vector<float> t = {0, 2, 4}, p = {0, 2, 3};
    CHECK(naive_r2(t, p) == doctest::Approx(0.875)); // the reference agrees first
    CHECK(r_squared(t, p) == doctest::Approx(0.875).epsilon(1e-9));
  }
  SUBCASE("perfect prediction is exactly 1") {
    const std::vector<float> t = {1, 2, 3, 4};
    CHECK(r_squared(t, t) == 1.0);
  }
  SUBCASE("predicting the mean scores 0") {
    const std::vector<float> t = {0, 2}, p = {1, 1};
    CHECK(r_squared(t, p) == doctest::Approx(0.0));
  }
  SUBCASE("random instances: oracle agreement and r2 <= 1") {
    std::mt19937 rng(11);
    std::normal_distribution<float> g(0.f, 2.f);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<float> t(20), p(20);
      for (int i = 0; i < 20; ++i) {
        t[i] = g(rng);
        p[i] = g(rng);
      }
      const double r = r_squared(t, p);
      CHECK(r == doctest::Approx(naive_r2(t, p)).epsilon(1e-9));
      CHECK(r <= 1.0);
    }
  }
  SUBCASE("constant y_true is rejected") {
    try {
      r_squared({2, 2, 2}, {1, 2, 3});
      FAIL("expected value_error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::value_error);
    }
  }
  SUBCASE("fewer than two samples is rejected") {
    CHECK_THROWS_AS(r_squared({1}, {1}), Error);
  }
}

TEST_CASE("mean_squared_error") {
  CHECK(mean_squared_error({0, 0}, {1, -1}) == doctest::Approx(1.0));
  CHECK(mean_squared_error({3, 3}, {3, 3}) == 0.0);
  CHECK_THROWS_AS(mean_squared_error({1}, {1, 2}), Error);
}

TEST_CASE("alignment_diagnostic hand case") {
  // class 0: source centroid (1,0), target (0,0); class 1: both at (2,2)
  const Mat fs = make_mat(2, 2, {1, 0, 2, 2});
  const Mat ft = make_mat(2, 2, {0, 0, 2, 2});
  const std::vector<int> ls = {0, 1}, lt = {0, 1};
  const AlignmentDiagnostic d = alignment_diagnostic(fs, ls, ft, lt, 2);
  CHECK(d.matched == doctest::Approx(0.5));      // (1 + 0) / 2
  CHECK(d.mismatched == doctest::Approx(6.5));   // (5 + 8) / 2
}

TEST_CASE("alignment_diagnostic centroids average over rows") {
  // two class-0 source rows averaging to (1, 0)
  const Mat fs = make_mat(3, 2, {0, 0, 2, 0, 2, 2});
  const Mat ft = make_mat(2, 2, {0, 0, 2, 2});
  const AlignmentDiagnostic d = alignment_diagnostic(fs, {0, 0, 1}, ft, {0, 1}, 2);
  CHECK(d.matched == doctest::Approx(0.5));
}

TEST_CASE("alignment_diagnostic is symmetric under swapping the sides") {
  const Mat a = random_mat(40, 6, 3);
  const Mat b = random_mat(30, 6, 4);
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<int> la(40), lb(30);
  for (int& v : la) v = pick(rng);
  for (int& v : lb) v = pick(rng);
  la[0] = 0, la[1] = 1, la[2] = 2; // every class present on both sides
  lb[0] = 0, lb[1] = 1, lb[2] = 2;
  const AlignmentDiagnostic fwd = alignment_diagnostic(a, la, b, lb, 3);
  const AlignmentDiagnostic rev = alignment_diagnostic(b, lb, a, la, 3);
  CHECK(fwd.matched == doctest::Approx(rev.matched).epsilon(1e-12));
  CHECK(fwd.mismatched == doctest::Approx(rev.mismatched).epsilon(1e-12));
}

TEST_CASE("alignment_diagnostic of identical features is exactly zero matched") {
  const Mat a = random_mat(20, 4, 9);
  std::vector<int> l(20);
  for (int i = 0; i < 20; ++i) l[i] = i % 2;
  const AlignmentDiagnostic d = alignment_diagnostic(a, l, a, l, 2);
  CHECK(d.matched == 0.0);
  CHECK(d.mismatched > 0.0);
}

TEST_CASE("alignment_diagnostic rejects a missing class") {
  const Mat a = random_mat(4, 2, 1);
  try {
    alignment_diagnostic(a, {0, 0, 1, 1}, a, {0, 0, 0, 0}, 2);
    FAIL("expected missing_class");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::missing_class);
  }
}

TEST_CASE("alignment_diagnostic over a real model encodes each side with its own encoder") {
  DatasetConfig d;
  d.num_classes = 2;
  d.samples_per_class_source = 4;
  d.samples_per_class_target_labeled = 3;
  d.samples_per_class_target_unlabeled = 2;
  d.source_shape = {8, 8, 1};
  d.target_shape = {4, 8, 1};
  d.seed = 2;
  const PairedData data = generate_paired(d);

  AutoencoderSpec ss, ts;
  ss.input_shape = d.source_shape;
  ts.input_shape = d.target_shape;
  ss.bottleneck_size = ts.bottleneck_size = 8;
  HeadSpec hs;
  hs.output_size = 2;
  AdaptationModel m = build_adaptation_model(ss, ts, hs, 0);

  const AlignmentDiagnostic diag = alignment_diagnostic(m, data.source, data.target_labeled);
  CHECK(std::isfinite(diag.matched));
  CHECK(std::isfinite(diag.mismatched));
  CHECK(diag.matched >= 0.0);
  CHECK(diag.mismatched >= 0.0);

  SUBCASE("unlabeled side is rejected") {
    CHECK_THROWS_AS(alignment_diagnostic(m, data.source, data.target_unlabeled), Error);
  }
}

TEST_CASE("project_top2 of 2-D features is an isometry") {
  const Mat x = random_mat(40, 2, 21);
  const Mat y = project_top2(x);
  REQUIRE(y.rows == 40);
  REQUIRE(y.cols == 2);
  for (int a = 0; a < 10; ++a)
    for (int b = a + 1; b < 10; ++b)
      CHECK(dist2d(y, a, b) == doctest::Approx(dist2d(x, a, b)).epsilon(1e-4));
}

TEST_CASE("project_top2 keeps distances of a plane embedded in 5-D") {
  // points on a 2-D plane spanned by two orthonormal 5-D directions
  std::mt19937 rng(13);
  std::normal_distribution<float> g(0.f, 1.f);
  const double u[5] = {0.6, 0.0, 0.8, 0.0, 0.0};
  const double v[5] = {0.0, 1.0, 0.0, 0.0, 0.0};
  const int n = 30;
  Mat x;
  x.rows = n;
  x.cols = 5;
  x.data.resize(n * 5);
  std::vector<std::pair<float, float>> plane(n);
  for (int i = 0; i < n; ++i) {
    plane[i] = {g(rng), g(rng)};
    for (int j = 0; j < 5; ++j)
      x.at(i, j) = (float)(plane[i].first * u[j] + plane[i].second * v[j]);
  }
  const Mat y = project_top2(x);
  for (int a = 0; a < 10; ++a)
    for (int b = a + 1; b < 10; ++b) {
      const double dx = plane[a].first - plane[b].first;
      const double dy = plane[a].second - plane[b].second;
      CHECK(dist2d(y, a, b) == doctest::Approx(std::sqrt(dx * dx + dy * dy)).epsilon(1e-4));
    }
}

TEST_CASE("project_top2 is deterministic, variance-ordered, and sign-pinned") {
  const Mat x = random_mat(50, 7, 33);
  const Mat a = project_top2(x);
  const Mat b = project_top2(x);
  CHECK(a.data == b.data); // bitwise
  double v0 = 0, v1 = 0;  // columns come out variance-sorted
  for (int i = 0; i < a.rows; ++i) {
    v0 += (double)a.at(i, 0) * a.at(i, 0);
    v1 += (double)a.at(i, 1) * a.at(i, 1);
  }
  CHECK(v0 >= v1);
}

TEST_CASE("project_top2 rejects degenerate input") {
  CHECK_THROWS_AS(project_top2(random_mat(2, 4, 1)), Error); // too few samples
  CHECK_THROWS_AS(project_top2(random_mat(5, 1, 1)), Error); // too few dims
}

TEST_CASE("separation_ratio rewards tight, distant clusters") {
  std::mt19937 rng(17);
  std::normal_distribution<float> g(0.f, 0.05f);
  const int per = 20;
  Mat pts;
  pts.rows = 2 * per;
  pts.cols = 2;
  pts.data.resize(4 * per);
  std::vector<int> labels(2 * per);
  for (int i = 0; i < per; ++i) {
    pts.at(i, 0) = g(rng);
    pts.at(i, 1) = g(rng);
    labels[i] = 0;
    pts.at(per + i, 0) = 10.f + g(rng);
    pts.at(per + i, 1) = g(rng);
    labels[per + i] = 1;
  }
  const double tight = separation_ratio(pts, labels, 2);
  CHECK(tight > 20.0);

  std::vector<int> shuffled = labels; // same points, labels decoupled from geometry
  for (int i = 0; i < 2 * per; ++i) shuffled[i] = i % 2;
  CHECK(separation_ratio(pts, shuffled, 2) < tight);

  SUBCASE("degenerate spread is rejected") {
    Mat same = make_mat(4, 2, {1, 1, 1, 1, 5, 5, 5, 5});
    try {
      separation_ratio(same, {0, 0, 1, 1}, 2);
      FAIL("expected value_error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::value_error);
    }
  }
}

TEST_CASE("export_embedding picks the encoder from the split tag") {
  DatasetConfig d;
  d.num_classes = 2;
  d.samples_per_class_source = 5;
  d.samples_per_class_target_labeled = 3;
  d.samples_per_class_target_unlabeled = 4;
  d.source_shape = {8, 8, 1};
  d.target_shape = {4, 8, 1};
  d.seed = 6;
  const PairedData data = generate_paired(d);

  AutoencoderSpec ss, ts;
  ss.input_shape = d.source_shape;
  ts.input_shape = d.target_shape;
  ss.bottleneck_size = ts.bottleneck_size = 8;
  HeadSpec hs;
  hs.output_size = 2;
  AdaptationModel m = build_adaptation_model(ss, ts, hs, 1);

  const Embedding es = export_embedding(m, data.source);
  CHECK(es.coords.rows == data.source.n);
  CHECK(es.labels == data.source.labels);
  const Embedding eu = export_embedding(m, data.target_unlabeled);
  CHECK(eu.coords.rows == data.target_unlabeled.n);
  CHECK(eu.labels.empty());

  SUBCASE("a shape that matches neither encoder is rejected") {
    Dataset wrong = data.target_labeled;
    wrong.split = SplitTag::source; // routes to the source encoder, wrong shape
    CHECK_THROWS_AS(export_embedding(m, wrong), Error);
  }
}

TEST_CASE("report.json writer is byte-stable and faithful") {
  TempDir tmp("saeda_eval_report");
  EvalReport r;
  r.task = "classification";
  r.accuracy = 0.75;
  r.confusion = Confusion(2);
  r.confusion.at(0, 0) = 3;
  r.confusion.at(0, 1) = 1;
  r.confusion.at(1, 1) = 3;
  r.confusion.at(1, 0) = 1;
  r.class_names = {"walk", "run"};
  r.has_alignment = true;
  r.alignment = {0.25, 4.0};

  const auto p1 = tmp.path / "a.json", p2 = tmp.path / "b.json";
  write_report_json(r, p1.string());
  write_report_json(r, p2.string());
  CHECK(slurp(p1) == slurp(p2));

  const auto j = nlohmann::json::parse(slurp(p1));
  CHECK(j["task"] == "classification");
  CHECK(j["accuracy"] == doctest::Approx(0.75));
  CHECK(j["confusion"][0][1] == 1);
  CHECK(j["class_names"][1] == "run");
  CHECK(j["alignment"]["matched"] == doctest::Approx(0.25));

  SUBCASE("regression report carries its own block") {
    EvalReport g;
    g.task = "regression";
    g.r_squared = 0.9;
    g.mse = 12.5;
    const auto p3 = tmp.path / "c.json";
    write_report_json(g, p3.string());
    const auto k = nlohmann::json::parse(slurp(p3));
    CHECK(k["r_squared"] == doctest::Approx(0.9));
    CHECK(k["mse"] == doctest::Approx(12.5));
    CHECK_FALSE(k.contains("accuracy"));
  }
}

TEST_CASE("confusion.csv layout") {
  TempDir tmp("saeda_eval_confusion");
  Confusion c(2);
  c.at(0, 0) = 5;
  c.at(0, 1) = 2;
  c.at(1, 0) = 1;
  c.at(1, 1) = 9;
  const auto p = tmp.path / "confusion.csv";
  write_confusion_csv(c, {"cat", "dog"}, p.string());
  CHECK(slurp(p) == "label,cat,dog\ncat,5,2\ndog,1,9\n");

  write_confusion_csv(c, {}, p.string()); // name fallback
  CHECK(slurp(p) == "label,class_0,class_1\nclass_0,5,2\nclass_1,1,9\n");
}

TEST_CASE("embedding.csv round-trips float coordinates exactly") {
  TempDir tmp("saeda_eval_embedding");
  const Mat coords = random_mat(25, 2, 41);
  std::vector<int> labels(25);
  for (int i = 0; i < 25; ++i) labels[i] = i % 3;
  const auto p = tmp.path / "embedding.csv";
  write_embedding_csv(coords, labels, p.string());

  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,y,label");
  for (int i = 0; i < 25; ++i) {
    REQUIRE(std::getline(in, line));
    const size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
    CHECK(std::strtof(line.substr(0, c1).c_str(), nullptr) == coords.at(i, 0));
    CHECK(std::strtof(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr) == coords.at(i, 1));
    CHECK(std::stoi(line.substr(c2 + 1)) == labels[i]);
  }
  CHECK_FALSE(std::getline(in, line));

  SUBCASE("no labels writes -1") {
    write_embedding_csv(coords, {}, p.string());
    std::ifstream again(p);
    std::getline(again, line);
    std::getline(again, line);
    CHECK(line.substr(line.rfind(',') + 1) == "-1");
  }
}
