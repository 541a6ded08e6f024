// Times the parallel BLAS-backed kernels against the serial reference
// implementations on training-sized shapes and verifies they agree exactly.
// Thread count comes from WAN_THREADS (default 1).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "wan/common.hpp"
#include "wan/kernels.hpp"

using namespace wan;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<double> random_buffer(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// median-of-5 wall time in milliseconds
double time_ms(const std::function<void()>& fn) {
  std::vector<double> samples;
  for (int i = 0; i < 5; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  return samples[2];
}

void report(const char* name, double ms_par, double ms_ref, double diff) {
  std::printf("%-28s %10.2f ms %10.2f ms %8.2fx   max |diff| %g\n", name, ms_par, ms_ref,
              ms_ref / ms_par, diff);
}

}  // namespace

int main() {
  const char* env = std::getenv("WAN_THREADS");
  std::printf("threads: %s\n", env != nullptr ? env : "1 (default)");
  std::printf("%-28s %13s %13s %9s\n", "kernel", "parallel", "reference", "speedup");

  Rng rng(99);

  {
    // encoder-sized convolution: 4x32x64x64 -> 64 channels, 3x3
    kernels::ConvGeom g{4, 32, 64, 64, 64, 3, 3, 1, 1, 1, 64, 64};
    std::vector<double> in = random_buffer(static_cast<size_t>(g.batch * g.in_ch * g.in_h * g.in_w), rng);
    std::vector<double> w = random_buffer(static_cast<size_t>(g.out_ch * g.patch_len()), rng);
    std::vector<double> b = random_buffer(static_cast<size_t>(g.out_ch), rng);
    const size_t out_n = static_cast<size_t>(g.batch * g.out_ch * g.out_h * g.out_w);
    std::vector<double> out_par(out_n), out_ref(out_n);

    const double par = time_ms([&] { kernels::conv2d_forward(in.data(), w.data(), b.data(), out_par.data(), g); });
    const double ref = time_ms([&] { kernels::ref::conv2d_forward(in.data(), w.data(), b.data(), out_ref.data(), g); });
    report("conv2d forward 3x3", par, ref, max_abs_diff(out_par, out_ref));

    std::vector<double> d_out = random_buffer(out_n, rng);
    std::vector<double> d_in_par(in.size()), d_in_ref(in.size());
    const double bpar = time_ms([&] {
      std::fill(d_in_par.begin(), d_in_par.end(), 0.0);
      kernels::conv2d_backward_input(d_out.data(), w.data(), d_in_par.data(), g);
    });
    const double bref = time_ms([&] {
      std::fill(d_in_ref.begin(), d_in_ref.end(), 0.0);
      kernels::ref::conv2d_backward_input(d_out.data(), w.data(), d_in_ref.data(), g);
    });
    report("conv2d backward input", bpar, bref, max_abs_diff(d_in_par, d_in_ref));

    std::vector<double> d_w_par(w.size()), d_w_ref(w.size());
    const double wpar = time_ms([&] {
      std::fill(d_w_par.begin(), d_w_par.end(), 0.0);
      kernels::conv2d_backward_weight(d_out.data(), in.data(), d_w_par.data(), g);
    });
    const double wref = time_ms([&] {
      std::fill(d_w_ref.begin(), d_w_ref.end(), 0.0);
      kernels::ref::conv2d_backward_weight(d_out.data(), in.data(), d_w_ref.data(), g);
    });
    report("conv2d backward weight", wpar, wref, max_abs_diff(d_w_par, d_w_ref));
  }

  {
    // discriminator-sized strided convolution: 4x64x64x64 -> 128, 4x4 stride 2
    kernels::ConvGeom g{4, 64, 64, 64, 128, 4, 4, 2, 1, 1, 32, 32};
    std::vector<double> in = random_buffer(static_cast<size_t>(g.batch * g.in_ch * g.in_h * g.in_w), rng);
    std::vector<double> w = random_buffer(static_cast<size_t>(g.out_ch * g.patch_len()), rng);
    std::vector<double> b = random_buffer(static_cast<size_t>(g.out_ch), rng);
    const size_t out_n = static_cast<size_t>(g.batch * g.out_ch * g.out_h * g.out_w);
    std::vector<double> out_par(out_n), out_ref(out_n);
    const double par = time_ms([&] { kernels::conv2d_forward(in.data(), w.data(), b.data(), out_par.data(), g); });
    const double ref = time_ms([&] { kernels::ref::conv2d_forward(in.data(), w.data(), b.data(), out_ref.data(), g); });
    report("conv2d forward 4x4 s2", par, ref, max_abs_diff(out_par, out_ref));
  }

  {
    const int64_t n = 8, c = 64, h = 128, w = 128;
    std::vector<double> in = random_buffer(static_cast<size_t>(n * c * h * w), rng);
    std::vector<double> out_par(static_cast<size_t>(n * c * (h / 2) * (w / 2)));
    std::vector<double> out_ref(out_par.size());
    std::vector<int64_t> am_par(out_par.size()), am_ref(out_par.size());
    const double par = time_ms([&] { kernels::maxpool_forward(in.data(), out_par.data(), am_par.data(), n, c, h, w, 2); });
    const double ref = time_ms([&] { kernels::ref::maxpool_forward(in.data(), out_ref.data(), am_ref.data(), n, c, h, w, 2); });
    report("maxpool 2x2", par, ref, max_abs_diff(out_par, out_ref));
  }

  {
    const int64_t n = 4, c = 3, ih = 500, iw = 500, oh = 512, ow = 512;
    std::vector<double> in = random_buffer(static_cast<size_t>(n * c * ih * iw), rng);
    std::vector<double> out_par(static_cast<size_t>(n * c * oh * ow)), out_ref(out_par.size());
    const double par = time_ms([&] { kernels::bilinear_forward(in.data(), out_par.data(), n, c, ih, iw, oh, ow); });
    const double ref = time_ms([&] { kernels::ref::bilinear_forward(in.data(), out_ref.data(), n, c, ih, iw, oh, ow); });
    report("bilinear 500 -> 512", par, ref, max_abs_diff(out_par, out_ref));
  }

  {
    const int64_t n = 64, in_f = 512, out_f = 256;
    std::vector<double> x = random_buffer(static_cast<size_t>(n * in_f), rng);
    std::vector<double> w = random_buffer(static_cast<size_t>(in_f * out_f), rng);
    std::vector<double> b = random_buffer(static_cast<size_t>(out_f), rng);
    std::vector<double> out_par(static_cast<size_t>(n * out_f)), out_ref(out_par.size());
    const double par = time_ms([&] { kernels::dense_forward(x.data(), w.data(), b.data(), out_par.data(), n, in_f, out_f); });
    const double ref = time_ms([&] { kernels::ref::dense_forward(x.data(), w.data(), b.data(), out_ref.data(), n, in_f, out_f); });
    report("dense 512 -> 256", par, ref, max_abs_diff(out_par, out_ref));
  }

  return 0;
}
