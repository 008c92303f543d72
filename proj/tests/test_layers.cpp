// Layer-level checks: gradient flow through small stacks vs. finite
// differences, determinism of init/forward, Adam behaviour.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "saeda/layers.hpp"
#include "saeda/rng.hpp"

using namespace saeda;

namespace {

// scalar probe loss: sum(y * G) for fixed G, so dL/dy = G.
double probe(const std::vector<float>& y, const std::vector<float>& G) {
  double s = 0;
  for (size_t i = 0; i < y.size(); ++i) s += (double)y[i] * G[i];
  return s;
}

std::vector<float> rand_vec(rng::Rng& r, size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = (float)r.uniform(lo, hi);
  return v;
}

} // namespace

TEST_CASE("conv -> pool -> dense stack gradient vs finite differences") {
  rng::Rng init_rng(7), data_rng(8);
  const int n = 3, h = 8, w = 8, cin = 1;

  Conv2DSame conv;
  conv.init(h, w, cin, 4, 3, 3, Act::relu, init_rng);
  MaxPool2x2 pool;
  pool.init(h, w, 4);
  Dense dense;
  dense.init((h / 2) * (w / 2) * 4, 6, Act::sigmoid, init_rng);

  auto x = rand_vec(data_rng, (size_t)n * h * w * cin, 0.0, 1.0);
  auto G = rand_vec(data_rng, (size_t)n * 6);

  auto run = [&](const std::vector<float>& input) {
    auto& a = conv.forward(input.data(), n);
    auto& p = pool.forward(a.data(), n);
    auto& out = dense.forward(p.data(), n);
    return probe(out, G);
  };

  run(x);
  std::vector<float> gtop((size_t)n * 6);
  for (size_t i = 0; i < gtop.size(); ++i) gtop[i] = G[i];
  auto& d_dense = dense.backward(gtop.data(), n);
  auto& d_pool = pool.backward(d_dense.data(), n);
  auto& d_conv = conv.backward(d_pool.data(), n);

  // input gradient (skip positions where relu/pool kinks could bite by
  // using a modest tolerance and stepping a subset)
  const double step = 1e-2;
  int checked = 0;
  for (size_t i = 0; i < x.size(); i += 11) {
    auto xp = x, xm = x;
    xp[i] += (float)step;
    xm[i] -= (float)step;
    double num = (run(xp) - run(xm)) / (2 * step);
    if (std::abs(num) < 1e-4 && std::abs(d_conv[i]) < 1e-4) continue; // both ~0
    CHECK(d_conv[i] == doctest::Approx(num).epsilon(8e-2));
    ++checked;
  }
  CHECK(checked > 5);

  // conv weight gradient
  run(x);
  conv.backward(pool.backward(dense.backward(gtop.data(), n).data(), n).data(), n);
  auto dW = conv.dW;
  for (size_t i = 0; i < conv.W.size(); i += 7) {
    float keep = conv.W[i];
    conv.W[i] = keep + (float)step;
    double up = run(x);
    conv.W[i] = keep - (float)step;
    double dn = run(x);
    conv.W[i] = keep;
    double num = (up - dn) / (2 * step);
    if (std::abs(num) < 1e-4 && std::abs(dW[i]) < 1e-4) continue;
    CHECK(dW[i] == doctest::Approx(num).epsilon(8e-2));
  }

  // dense weight gradient
  run(x);
  dense.backward(gtop.data(), n);
  auto dWd = dense.dW;
  for (size_t i = 0; i < dense.W.size(); i += 101) {
    float keep = dense.W[i];
    dense.W[i] = keep + (float)step;
    double up = run(x);
    dense.W[i] = keep - (float)step;
    double dn = run(x);
    dense.W[i] = keep;
    double num = (up - dn) / (2 * step);
    if (std::abs(num) < 1e-4 && std::abs(dWd[i]) < 1e-4) continue;
    CHECK(dWd[i] == doctest::Approx(num).epsilon(8e-2));
  }
}

TEST_CASE("layer init is deterministic under seed") {
  rng::Rng a(55), b(55);
  Conv2DSame c1, c2;
  c1.init(8, 8, 1, 16, 2, 2, Act::relu, a);
  c2.init(8, 8, 1, 16, 2, 2, Act::relu, b);
  CHECK(c1.W == c2.W);
  CHECK(c1.b == c2.b);
  Dense d1, d2;
  d1.init(64, 10, Act::none, a);
  d2.init(64, 10, Act::none, b);
  CHECK(d1.W == d2.W);
}

TEST_CASE("sigmoid output lies strictly in (0,1)") {
  rng::Rng r(66);
  Dense d;
  d.init(5, 4, Act::sigmoid, r);
  auto x = rand_vec(r, 3 * 5, -50.0, 50.0);
  auto& y = d.forward(x.data(), 3);
  for (float v : y) {
    CHECK(v > 0.f);
    CHECK(v < 1.f);
  }
}

TEST_CASE("softmax rows sum to one and respect ordering") {
  std::vector<float> logits{1.f, 2.f, 3.f, -1000.f, 0.f, 1000.f};
  std::vector<float> p(6);
  softmax_rows(logits.data(), 2, 3, p.data());
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(p[3] + p[4] + p[5] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(p[0] < p[1]);
  CHECK(p[1] < p[2]);
  CHECK(p[5] == doctest::Approx(1.0)); // extreme logits stay finite
}

TEST_CASE("adam reduces a simple quadratic and is deterministic") {
  auto run = [] {
    std::vector<float> w{5.f, -3.f};
    AdamState st;
    st.init(2);
    AdamParams ap;
    ap.lr = 0.1f;
    for (int t = 1; t <= 200; ++t) {
      std::vector<float> g{2.f * w[0], 2.f * w[1]}; // d/dw of w^2
      adam_step(w, g, st, ap, t);
    }
    return w;
  };
  auto w1 = run(), w2 = run();
  CHECK(w1 == w2);
  CHECK(std::abs(w1[0]) < 0.5f);
  CHECK(std::abs(w1[1]) < 0.5f);
}
