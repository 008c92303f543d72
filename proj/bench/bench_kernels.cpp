// bench_kernels — throughput comparison of the serial reference kernels vs
// the OpenMP implementations, on the layer shapes the default model actually
// runs. Also re-checks bitwise agreement of the two implementations on every
// benchmarked call (the unit tests assert it; here it is a free sanity net).
//
// usage: bench_kernels [iters]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "saeda/kernels.hpp"

using namespace saeda;

namespace {

std::vector<float> random_vec(size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

template <typename F>
double best_ms(F&& fn, int iters) {
  fn(); // warm-up
  double best = 1e300;
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

struct Row {
  std::string name;
  double serial_ms, omp_ms;
  bool identical;
};

std::vector<Row> rows;

template <typename F>
void bench(const std::string& name, size_t out_elems, F&& run, int iters) {
  std::vector<float> out_serial(out_elems, 0.f), out_omp(out_elems, 0.f);
  const double s = best_ms([&] { run(false, out_serial.data()); }, iters);
  const double o = best_ms([&] { run(true, out_omp.data()); }, iters);
  rows.push_back({name, s, o,
                  std::memcmp(out_serial.data(), out_omp.data(), out_elems * sizeof(float)) == 0});
}

} // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  const int iters = argc > 1 ? std::atoi(argv[1]) : 20;
  const int n = 32; // training batch size

  // source auto-encoder layer shapes (32x32x1 input)
  const auto x1 = random_vec((size_t)n * 32 * 32 * 1, 1);
  const auto w1 = random_vec(3 * 3 * 1 * 8, 2);
  const auto b8 = random_vec(8, 3);
  bench("conv 3x3x1->8  @32x32", (size_t)n * 32 * 32 * 8,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::conv2d_forward : kernels::serial::conv2d_forward)(
              x1.data(), n, 32, 32, 1, w1.data(), b8.data(), 8, 3, 3, out);
        },
        iters);

  const auto x2 = random_vec((size_t)n * 16 * 16 * 8, 4);
  const auto w2 = random_vec(3 * 3 * 8 * 16, 5);
  const auto b16 = random_vec(16, 6);
  bench("conv 3x3x8->16 @16x16", (size_t)n * 16 * 16 * 16,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::conv2d_forward : kernels::serial::conv2d_forward)(
              x2.data(), n, 16, 16, 8, w2.data(), b16.data(), 16, 3, 3, out);
        },
        iters);

  const auto dy2 = random_vec((size_t)n * 16 * 16 * 16, 7);
  bench("conv bwd data  @16x16", (size_t)n * 16 * 16 * 8,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::conv2d_backward_data : kernels::serial::conv2d_backward_data)(
              dy2.data(), n, 16, 16, 8, w2.data(), 16, 3, 3, out);
        },
        iters);

  std::vector<float> dbias(16);
  bench("conv bwd weights", (size_t)3 * 3 * 8 * 16,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::conv2d_backward_weights
               : kernels::serial::conv2d_backward_weights)(x2.data(), dy2.data(), n, 16, 16, 8,
                                                           16, 3, 3, out, dbias.data());
        },
        iters);

  const auto xp = random_vec((size_t)n * 32 * 32 * 8, 8);
  std::vector<int> argmax((size_t)n * 16 * 16 * 8);
  bench("maxpool 2x2    @32x32", (size_t)n * 16 * 16 * 8,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::maxpool2x2_forward : kernels::serial::maxpool2x2_forward)(
              xp.data(), n, 32, 32, 8, out, argmax.data());
        },
        iters);

  const auto xu = random_vec((size_t)n * 8 * 8 * 16, 9);
  bench("upsample 2x2   @8x8", (size_t)n * 16 * 16 * 16,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::upsample2x2_forward : kernels::serial::upsample2x2_forward)(
              xu.data(), n, 8, 8, 16, out);
        },
        iters);

  const auto xd = random_vec((size_t)n * 1024, 10);
  const auto wd = random_vec(1024 * 100, 11);
  const auto bd = random_vec(100, 12);
  bench("dense 1024->100", (size_t)n * 100,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::dense_forward : kernels::serial::dense_forward)(
              xd.data(), n, 1024, wd.data(), bd.data(), 100, out);
        },
        iters);

  const auto dyd = random_vec((size_t)n * 100, 13);
  std::vector<float> dbias2(100);
  bench("dense bwd weights", (size_t)1024 * 100,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::dense_backward_weights : kernels::serial::dense_backward_weights)(
              xd.data(), dyd.data(), n, 1024, 100, out, dbias2.data());
        },
        iters);

  const auto ma = random_vec(256 * 512, 14);
  const auto mb = random_vec(512 * 128, 15);
  bench("matmul 256x512x128", (size_t)256 * 128,
        [&](bool omp, float* out) {
          (omp ? kernels::omp::matmul : kernels::serial::matmul)(ma.data(), mb.data(), out, 256,
                                                                 512, 128);
        },
        iters);

  std::printf("threads: %d, batch: %d, best of %d iters\n\n", kernels::thread_count(), n, iters);
  std::printf("%-22s %12s %12s %9s %6s\n", "kernel", "serial (ms)", "omp (ms)", "speedup",
              "equal");
  bool all_equal = true;
  for (const Row& r : rows) {
    std::printf("%-22s %12.3f %12.3f %8.2fx %6s\n", r.name.c_str(), r.serial_ms, r.omp_ms,
                r.serial_ms / r.omp_ms, r.identical ? "yes" : "NO");
    all_equal &= r.identical;
  }
  if (!all_equal) {
    std::fprintf(stderr, "\nERROR: serial and omp outputs disagree\n");
    return 1;
  }
  return 0;
}
