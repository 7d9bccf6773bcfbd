// Times the OpenMP kernels against their serial references and checks the
// outputs stay bit-identical. Run: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "attrib/kernels.hpp"
#include "attrib/rng.hpp"

using namespace attrib;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<double> random_vec(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

struct Timing {
  double serial_ms = 0.0;
  double parallel_ms = 0.0;
  bool bit_identical = true;
};

template <typename SerialFn, typename ParallelFn>
Timing run_pair(int repeats, size_t out_size, SerialFn serial,
                ParallelFn parallel) {
  std::vector<double> y_ref(out_size), y_omp(out_size);
  Timing t;
  // warmup
  serial(y_ref.data());
  parallel(y_omp.data());
  t.bit_identical =
      std::memcmp(y_ref.data(), y_omp.data(), out_size * sizeof(double)) == 0;
  double t0 = now_ms();
  for (int r = 0; r < repeats; ++r) serial(y_ref.data());
  t.serial_ms = (now_ms() - t0) / repeats;
  t0 = now_ms();
  for (int r = 0; r < repeats; ++r) parallel(y_omp.data());
  t.parallel_ms = (now_ms() - t0) / repeats;
  return t;
}

void report(const std::string& name, const Timing& t) {
  std::printf("%-24s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n",
              name.c_str(), t.serial_ms, t.parallel_ms,
              t.serial_ms / t.parallel_ms,
              t.bit_identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 20;
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif

  {
    kernels::Conv2DSpec s;
    s.in_c = 16;
    s.out_c = 32;
    s.in_h = s.in_w = 64;
    s.k = 3;
    s.stride = 1;
    s.pad = 1;
    const auto x = random_vec(static_cast<size_t>(s.in_c) * s.in_h * s.in_w, 1);
    const auto w =
        random_vec(static_cast<size_t>(s.out_c) * s.in_c * s.k * s.k, 2);
    const auto b = random_vec(s.out_c, 3);
    const size_t out = static_cast<size_t>(s.out_c) * s.out_h() * s.out_w();
    report("conv2d_forward",
           run_pair(
               repeats, out,
               [&](double* y) {
                 kernels::conv2d_forward_ref(x.data(), s, w.data(), b.data(), y);
               },
               [&](double* y) {
                 kernels::conv2d_forward(x.data(), s, w.data(), b.data(), y);
               }));

    const auto gy = random_vec(out, 4);
    report("conv2d_backward_data",
           run_pair(
               repeats, x.size(),
               [&](double* gx) {
                 kernels::conv2d_backward_data_ref(gy.data(), s, w.data(), gx);
               },
               [&](double* gx) {
                 kernels::conv2d_backward_data(gy.data(), s, w.data(), gx);
               }));

    report("conv2d_backward_weights",
           run_pair(
               repeats, w.size(),
               [&](double* gw) {
                 std::memset(gw, 0, w.size() * sizeof(double));
                 kernels::conv2d_backward_weights_ref(x.data(), gy.data(), s,
                                                      gw, nullptr);
               },
               [&](double* gw) {
                 std::memset(gw, 0, w.size() * sizeof(double));
                 kernels::conv2d_backward_weights(x.data(), gy.data(), s, gw,
                                                  nullptr);
               }));
  }

  {
    const int in = 4096, out = 1024;
    const auto x = random_vec(in, 5);
    const auto w = random_vec(static_cast<size_t>(in) * out, 6);
    const auto b = random_vec(out, 7);
    report("dense_forward",
           run_pair(
               repeats, out,
               [&](double* y) {
                 kernels::dense_forward_ref(x.data(), w.data(), b.data(), in,
                                            out, y);
               },
               [&](double* y) {
                 kernels::dense_forward(x.data(), w.data(), b.data(), in, out,
                                        y);
               }));
  }

  {
    const int c = 3, h = 256, w = 256, k = 15;
    const auto x = random_vec(static_cast<size_t>(c) * h * w, 8);
    report("box_blur",
           run_pair(
               repeats, x.size(),
               [&](double* y) { kernels::box_blur_ref(x.data(), c, h, w, k, y); },
               [&](double* y) { kernels::box_blur(x.data(), c, h, w, k, y); }));
  }

  return 0;
}
