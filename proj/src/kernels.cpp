#include "wan/kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <vector>

#include "wan/common.hpp"

namespace wan {

int thread_count() {
  static const int n = [] {
    const char* env = std::getenv("WAN_THREADS");
    if (!env || !*env) return 1;
    const long v = std::strtol(env, nullptr, 10);
    return static_cast<int>(std::clamp(v, 1l, 256l));
  }();
  return n;
}

}  // namespace wan

namespace wan::kernels {

namespace {

// GEMM calls must run single-threaded: the op-level loops already parallelize
// over images, and a fixed intra-GEMM schedule keeps results reproducible.
void ensure_blas_serial() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

// Column buffer layout: [in_ch * k_h * k_w][out_h * out_w], row-major.
void im2col(const double* in, double* col, const ConvGeom& g) {
  const int64_t ohw = g.out_h * g.out_w;
  for (int64_t ci = 0; ci < g.in_ch; ++ci) {
    const double* plane = in + ci * g.in_h * g.in_w;
    for (int64_t kh = 0; kh < g.k_h; ++kh) {
      for (int64_t kw = 0; kw < g.k_w; ++kw) {
        double* row = col + ((ci * g.k_h + kh) * g.k_w + kw) * ohw;
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
          const int64_t ih = oh * g.stride - g.pad_top + kh;
          double* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= g.in_h) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src_row = plane + ih * g.in_w;
          for (int64_t ow = 0; ow < g.out_w; ++ow) {
            const int64_t iw = ow * g.stride - g.pad_left + kw;
            dst[ow] = (iw >= 0 && iw < g.in_w) ? src_row[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, double* in_grad, const ConvGeom& g) {
  const int64_t ohw = g.out_h * g.out_w;
  for (int64_t ci = 0; ci < g.in_ch; ++ci) {
    double* plane = in_grad + ci * g.in_h * g.in_w;
    for (int64_t kh = 0; kh < g.k_h; ++kh) {
      for (int64_t kw = 0; kw < g.k_w; ++kw) {
        const double* row = col + ((ci * g.k_h + kh) * g.k_w + kw) * ohw;
        for (int64_t oh = 0; oh < g.out_h; ++oh) {
          const int64_t ih = oh * g.stride - g.pad_top + kh;
          if (ih < 0 || ih >= g.in_h) continue;
          double* dst_row = plane + ih * g.in_w;
          const double* src = row + oh * g.out_w;
          for (int64_t ow = 0; ow < g.out_w; ++ow) {
            const int64_t iw = ow * g.stride - g.pad_left + kw;
            if (iw >= 0 && iw < g.in_w) dst_row[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward(const double* in, const double* weight, const double* bias, double* out,
                    const ConvGeom& g) {
  ensure_blas_serial();
  const int64_t k = g.patch_len();
  const int64_t ohw = g.out_h * g.out_w;
  const int64_t in_sz = g.in_ch * g.in_h * g.in_w;
  const int64_t out_sz = g.out_ch * ohw;
#pragma omp parallel num_threads(thread_count())
  {
    std::vector<double> col(static_cast<size_t>(k * ohw));
#pragma omp for schedule(static)
    for (int64_t n = 0; n < g.batch; ++n) {
      im2col(in + n * in_sz, col.data(), g);
      double* o = out + n * out_sz;
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(g.out_ch),
                  static_cast<int>(ohw), static_cast<int>(k), 1.0, weight, static_cast<int>(k),
                  col.data(), static_cast<int>(ohw), 0.0, o, static_cast<int>(ohw));
      if (bias) {
        for (int64_t co = 0; co < g.out_ch; ++co) {
          const double b = bias[co];
          double* plane = o + co * ohw;
          for (int64_t i = 0; i < ohw; ++i) plane[i] += b;
        }
      }
    }
  }
}

void conv2d_backward_input(const double* d_out, const double* weight, double* d_in,
                           const ConvGeom& g) {
  ensure_blas_serial();
  const int64_t k = g.patch_len();
  const int64_t ohw = g.out_h * g.out_w;
  const int64_t in_sz = g.in_ch * g.in_h * g.in_w;
  const int64_t out_sz = g.out_ch * ohw;
#pragma omp parallel num_threads(thread_count())
  {
    std::vector<double> col(static_cast<size_t>(k * ohw));
#pragma omp for schedule(static)
    for (int64_t n = 0; n < g.batch; ++n) {
      cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(k),
                  static_cast<int>(ohw), static_cast<int>(g.out_ch), 1.0, weight,
                  static_cast<int>(k), d_out + n * out_sz, static_cast<int>(ohw), 0.0, col.data(),
                  static_cast<int>(ohw));
      col2im_add(col.data(), d_in + n * in_sz, g);
    }
  }
}

void conv2d_backward_weight(const double* d_out, const double* in, double* d_weight,
                            const ConvGeom& g) {
  ensure_blas_serial();
  const int64_t k = g.patch_len();
  const int64_t ohw = g.out_h * g.out_w;
  const int64_t in_sz = g.in_ch * g.in_h * g.in_w;
  const int64_t out_sz = g.out_ch * ohw;
  std::vector<double> col(static_cast<size_t>(k * ohw));
  // Serial over the batch: weight gradient accumulation order is fixed.
  for (int64_t n = 0; n < g.batch; ++n) {
    im2col(in + n * in_sz, col.data(), g);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(g.out_ch),
                static_cast<int>(k), static_cast<int>(ohw), 1.0, d_out + n * out_sz,
                static_cast<int>(ohw), col.data(), static_cast<int>(ohw), 1.0, d_weight,
                static_cast<int>(k));
  }
}

void conv2d_backward_bias(const double* d_out, double* d_bias, const ConvGeom& g) {
  const int64_t ohw = g.out_h * g.out_w;
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t co = 0; co < g.out_ch; ++co) {
      const double* plane = d_out + (n * g.out_ch + co) * ohw;
      double acc = 0.0;
      for (int64_t i = 0; i < ohw; ++i) acc += plane[i];
      d_bias[co] += acc;
    }
  }
}

void maxpool_forward(const double* in, double* out, int64_t* argmax, int64_t n, int64_t c,
                     int64_t h, int64_t w, int64_t window) {
  const int64_t oh = h / window, ow = w / window;
  const int64_t planes = n * c;
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = in + p * h * w;
    double* dst = out + p * oh * ow;
    int64_t* arg = argmax + p * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        int64_t best_idx = (y * window) * w + x * window;
        double best = src[best_idx];
        for (int64_t dy = 0; dy < window; ++dy) {
          for (int64_t dx = 0; dx < window; ++dx) {
            const int64_t idx = (y * window + dy) * w + (x * window + dx);
            if (src[idx] > best) {  // strict: first maximum wins
              best = src[idx];
              best_idx = idx;
            }
          }
        }
        dst[y * ow + x] = best;
        arg[y * ow + x] = p * h * w + best_idx;
      }
    }
  }
}

void maxpool_backward(const double* d_out, const int64_t* argmax, double* d_in, int64_t n,
                      int64_t c, int64_t h, int64_t w, int64_t window) {
  const int64_t oh = h / window, ow = w / window;
  const int64_t planes = n * c;
  (void)h;
  (void)w;
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int64_t p = 0; p < planes; ++p) {
    const double* dsrc = d_out + p * oh * ow;
    const int64_t* arg = argmax + p * oh * ow;
    for (int64_t i = 0; i < oh * ow; ++i) d_in[arg[i]] += dsrc[i];
  }
}

void avgpool_forward(const double* in, double* out, int64_t n, int64_t c, int64_t h, int64_t w,
                     int64_t window) {
  const int64_t oh = h / window, ow = w / window;
  const int64_t planes = n * c;
  const double inv = 1.0 / static_cast<double>(window * window);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = in + p * h * w;
    double* dst = out + p * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int64_t dy = 0; dy < window; ++dy)
          for (int64_t dx = 0; dx < window; ++dx)
            acc += src[(y * window + dy) * w + (x * window + dx)];
        dst[y * ow + x] = acc * inv;
      }
    }
  }
}

void avgpool_backward(const double* d_out, double* d_in, int64_t n, int64_t c, int64_t h,
                      int64_t w, int64_t window) {
  const int64_t oh = h / window, ow = w / window;
  const int64_t planes = n * c;
  const double inv = 1.0 / static_cast<double>(window * window);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int64_t p = 0; p < planes; ++p) {
    const double* dsrc = d_out + p * oh * ow;
    double* dst = d_in + p * h * w;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        const double v = dsrc[y * ow + x] * inv;
        for (int64_t dy = 0; dy < window; ++dy)
          for (int64_t dx = 0; dx < window; ++dx)
            dst[(y * window + dy) * w + (x * window + dx)] += v;
      }
    }
  }
}

namespace {

struct Tap {
  int64_t lo, hi;
  double w_hi;  // weight of the hi sample; lo gets 1 - w_hi
};

// align_corners = false: src = (dst + 0.5) * in/out - 0.5, clamped taps.
std::vector<Tap> bilinear_taps(int64_t in_extent, int64_t out_extent) {
  std::vector<Tap> taps(static_cast<size_t>(out_extent));
  const double scale = static_cast<double>(in_extent) / static_cast<double>(out_extent);
  for (int64_t o = 0; o < out_extent; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    double fl = std::floor(src);
    double frac = src - fl;
    int64_t lo = static_cast<int64_t>(fl);
    int64_t hi = lo + 1;
    if (lo < 0) {
      lo = 0;
      hi = 0;
      frac = 0.0;
    }
    if (hi > in_extent - 1) {
      hi = in_extent - 1;
      if (lo > in_extent - 1) lo = in_extent - 1;
      if (lo == hi) frac = 0.0;
    }
    taps[static_cast<size_t>(o)] = {lo, hi, frac};
  }
  return taps;
}

}  // namespace

void bilinear_forward(const double* in, double* out, int64_t n, int64_t c, int64_t in_h,
                      int64_t in_w, int64_t out_h, int64_t out_w) {
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  const int64_t planes = n * c;
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = in + p * in_h * in_w;
    double* dst = out + p * out_h * out_w;
    for (int64_t y = 0; y < out_h; ++y) {
      const Tap& a = ty[static_cast<size_t>(y)];
      const double* r0 = src + a.lo * in_w;
      const double* r1 = src + a.hi * in_w;
      for (int64_t x = 0; x < out_w; ++x) {
        const Tap& b = tx[static_cast<size_t>(x)];
        const double top = r0[b.lo] * (1.0 - b.w_hi) + r0[b.hi] * b.w_hi;
        const double bot = r1[b.lo] * (1.0 - b.w_hi) + r1[b.hi] * b.w_hi;
        dst[y * out_w + x] = top * (1.0 - a.w_hi) + bot * a.w_hi;
      }
    }
  }
}

void bilinear_backward(const double* d_out, double* d_in, int64_t n, int64_t c, int64_t in_h,
                       int64_t in_w, int64_t out_h, int64_t out_w) {
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  const int64_t planes = n * c;
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int64_t p = 0; p < planes; ++p) {
    const double* dsrc = d_out + p * out_h * out_w;
    double* dst = d_in + p * in_h * in_w;
    for (int64_t y = 0; y < out_h; ++y) {
      const Tap& a = ty[static_cast<size_t>(y)];
      for (int64_t x = 0; x < out_w; ++x) {
        const Tap& b = tx[static_cast<size_t>(x)];
        const double g = dsrc[y * out_w + x];
        dst[a.lo * in_w + b.lo] += g * (1.0 - a.w_hi) * (1.0 - b.w_hi);
        dst[a.lo * in_w + b.hi] += g * (1.0 - a.w_hi) * b.w_hi;
        dst[a.hi * in_w + b.lo] += g * a.w_hi * (1.0 - b.w_hi);
        dst[a.hi * in_w + b.hi] += g * a.w_hi * b.w_hi;
      }
    }
  }
}

void nearest_up_forward(const double* in, double* out, int64_t n, int64_t c, int64_t h, int64_t w,
                        int64_t factor) {
  const int64_t oh = h * factor, ow = w * factor;
  const int64_t planes = n * c;
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = in + p * h * w;
    double* dst = out + p * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      const double* srow = src + (y / factor) * w;
      double* drow = dst + y * ow;
      for (int64_t x = 0; x < ow; ++x) drow[x] = srow[x / factor];
    }
  }
}

void nearest_up_backward(const double* d_out, double* d_in, int64_t n, int64_t c, int64_t h,
                         int64_t w, int64_t factor) {
  const int64_t ow = w * factor;
  const int64_t planes = n * c;
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int64_t p = 0; p < planes; ++p) {
    const double* dsrc = d_out + p * h * factor * ow;
    double* dst = d_in + p * h * w;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t dy = 0; dy < factor; ++dy) {
          const double* row = dsrc + (y * factor + dy) * ow + x * factor;
          for (int64_t dx = 0; dx < factor; ++dx) acc += row[dx];
        }
        dst[y * w + x] += acc;
      }
    }
  }
}

void dense_forward(const double* x, const double* weight, const double* bias, double* out,
                   int64_t n, int64_t in_f, int64_t out_f) {
  ensure_blas_serial();
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(n),
              static_cast<int>(out_f), static_cast<int>(in_f), 1.0, x, static_cast<int>(in_f),
              weight, static_cast<int>(out_f), 0.0, out, static_cast<int>(out_f));
  if (bias) {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < out_f; ++j) out[i * out_f + j] += bias[j];
  }
}

void dense_backward_input(const double* d_out, const double* weight, double* d_x, int64_t n,
                          int64_t in_f, int64_t out_f) {
  ensure_blas_serial();
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(n),
              static_cast<int>(in_f), static_cast<int>(out_f), 1.0, d_out,
              static_cast<int>(out_f), weight, static_cast<int>(out_f), 1.0, d_x,
              static_cast<int>(in_f));
}

void dense_backward_weight(const double* d_out, const double* x, double* d_weight, int64_t n,
                           int64_t in_f, int64_t out_f) {
  ensure_blas_serial();
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(in_f),
              static_cast<int>(out_f), static_cast<int>(n), 1.0, x, static_cast<int>(in_f), d_out,
              static_cast<int>(out_f), 1.0, d_weight, static_cast<int>(out_f));
}

void dense_backward_bias(const double* d_out, double* d_bias, int64_t n, int64_t out_f) {
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < out_f; ++j) d_bias[j] += d_out[i * out_f + j];
}

}  // namespace wan::kernels
