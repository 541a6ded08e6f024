#include <cstdint>
#include <vector>

#include "doctest.h"
#include "wan/common.hpp"
#include "wan/kernels.hpp"

// The optimized kernels (BLAS inner products, OpenMP over images/planes) are
// checked elementwise against the serial naive reference implementations.

using namespace wan;
using kernels::ConvGeom;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

ConvGeom make_geom(int64_t batch, int64_t cin, int64_t h, int64_t w, int64_t cout, int64_t k,
                   int64_t stride, bool same) {
  ConvGeom g{batch, cin, h, w, cout, k, k, stride, 0, 0, 0, 0};
  int64_t pad_h = 0, pad_w = 0;
  if (same) {
    const int64_t oh = (h + stride - 1) / stride;
    const int64_t ow = (w + stride - 1) / stride;
    pad_h = std::max<int64_t>(0, (oh - 1) * stride + k - h);
    pad_w = std::max<int64_t>(0, (ow - 1) * stride + k - w);
  }
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  g.out_h = (h + pad_h - k) / stride + 1;
  g.out_w = (w + pad_w - k) / stride + 1;
  return g;
}

}  // namespace

TEST_CASE("conv2d optimized matches reference") {
  Rng rng(42);
  for (bool same : {false, true}) {
    for (int64_t stride : {int64_t{1}, int64_t{2}}) {
      ConvGeom g = make_geom(2, 3, 11, 9, 4, 3, stride, same);
      auto in = random_vec(static_cast<size_t>(g.batch * g.in_ch * g.in_h * g.in_w), rng);
      auto w = random_vec(static_cast<size_t>(g.out_ch * g.patch_len()), rng);
      auto b = random_vec(static_cast<size_t>(g.out_ch), rng);
      const size_t out_n = static_cast<size_t>(g.batch * g.out_ch * g.out_h * g.out_w);
      std::vector<double> out_fast(out_n), out_ref(out_n);
      kernels::conv2d_forward(in.data(), w.data(), b.data(), out_fast.data(), g);
      kernels::ref::conv2d_forward(in.data(), w.data(), b.data(), out_ref.data(), g);
      for (size_t i = 0; i < out_n; ++i)
        CHECK(out_fast[i] == doctest::Approx(out_ref[i]).epsilon(1e-12));

      auto d_out = random_vec(out_n, rng);
      std::vector<double> din_fast(in.size(), 0.0), din_ref(in.size(), 0.0);
      kernels::conv2d_backward_input(d_out.data(), w.data(), din_fast.data(), g);
      kernels::ref::conv2d_backward_input(d_out.data(), w.data(), din_ref.data(), g);
      for (size_t i = 0; i < in.size(); ++i)
        CHECK(din_fast[i] == doctest::Approx(din_ref[i]).epsilon(1e-12));

      std::vector<double> dw_fast(w.size(), 0.0), dw_ref(w.size(), 0.0);
      kernels::conv2d_backward_weight(d_out.data(), in.data(), dw_fast.data(), g);
      kernels::ref::conv2d_backward_weight(d_out.data(), in.data(), dw_ref.data(), g);
      for (size_t i = 0; i < w.size(); ++i)
        CHECK(dw_fast[i] == doctest::Approx(dw_ref[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d backward kernels accumulate instead of overwriting") {
  Rng rng(7);
  ConvGeom g = make_geom(1, 2, 6, 6, 3, 3, 1, true);
  auto in = random_vec(static_cast<size_t>(g.in_ch * g.in_h * g.in_w), rng);
  auto w = random_vec(static_cast<size_t>(g.out_ch * g.patch_len()), rng);
  auto d_out = random_vec(static_cast<size_t>(g.out_ch * g.out_h * g.out_w), rng);
  std::vector<double> once(in.size(), 0.0), twice(in.size(), 0.0);
  kernels::conv2d_backward_input(d_out.data(), w.data(), once.data(), g);
  kernels::conv2d_backward_input(d_out.data(), w.data(), twice.data(), g);
  kernels::conv2d_backward_input(d_out.data(), w.data(), twice.data(), g);
  for (size_t i = 0; i < in.size(); ++i)
    CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("maxpool matches reference and keeps first-wins ties") {
  Rng rng(3);
  const int64_t n = 2, c = 3, h = 8, w = 8, window = 2;
  auto in = random_vec(static_cast<size_t>(n * c * h * w), rng);
  const size_t out_n = static_cast<size_t>(n * c * (h / window) * (w / window));
  std::vector<double> out_fast(out_n), out_ref(out_n);
  std::vector<int64_t> arg_fast(out_n), arg_ref(out_n);
  kernels::maxpool_forward(in.data(), out_fast.data(), arg_fast.data(), n, c, h, w, window);
  kernels::ref::maxpool_forward(in.data(), out_ref.data(), arg_ref.data(), n, c, h, w, window);
  CHECK(out_fast == out_ref);
  CHECK(arg_fast == arg_ref);

  // Constant plane: every argmax must be the window's first (row-major) cell.
  std::vector<double> flat(static_cast<size_t>(h * w), 1.0);
  std::vector<double> pooled(static_cast<size_t>((h / 2) * (w / 2)));
  std::vector<int64_t> arg(pooled.size());
  kernels::maxpool_forward(flat.data(), pooled.data(), arg.data(), 1, 1, h, w, 2);
  for (int64_t y = 0; y < h / 2; ++y)
    for (int64_t x = 0; x < w / 2; ++x)
      CHECK(arg[static_cast<size_t>(y * (w / 2) + x)] == (2 * y) * w + 2 * x);
}

TEST_CASE("bilinear matches reference") {
  Rng rng(11);
  const int64_t n = 1, c = 2;
  struct Case {
    int64_t ih, iw, oh, ow;
  };
  for (auto [ih, iw, oh, ow] : {Case{4, 6, 8, 12}, Case{8, 8, 4, 4}, Case{5, 5, 5, 5},
                                Case{3, 7, 9, 14}}) {
    auto in = random_vec(static_cast<size_t>(n * c * ih * iw), rng);
    std::vector<double> fast(static_cast<size_t>(n * c * oh * ow));
    std::vector<double> refv(fast.size());
    kernels::bilinear_forward(in.data(), fast.data(), n, c, ih, iw, oh, ow);
    kernels::ref::bilinear_forward(in.data(), refv.data(), n, c, ih, iw, oh, ow);
    for (size_t i = 0; i < fast.size(); ++i)
      CHECK(fast[i] == doctest::Approx(refv[i]).epsilon(1e-12));
  }
}

TEST_CASE("dense matches reference") {
  Rng rng(5);
  const int64_t n = 4, in_f = 7, out_f = 5;
  auto x = random_vec(static_cast<size_t>(n * in_f), rng);
  auto w = random_vec(static_cast<size_t>(in_f * out_f), rng);
  auto b = random_vec(static_cast<size_t>(out_f), rng);
  std::vector<double> fast(static_cast<size_t>(n * out_f)), refv(fast.size());
  kernels::dense_forward(x.data(), w.data(), b.data(), fast.data(), n, in_f, out_f);
  kernels::ref::dense_forward(x.data(), w.data(), b.data(), refv.data(), n, in_f, out_f);
  for (size_t i = 0; i < fast.size(); ++i)
    CHECK(fast[i] == doctest::Approx(refv[i]).epsilon(1e-12));
}
