#include <cmath>

#include "wan/kernels.hpp"

// Naive serial reference kernels. Written independently of the optimized
// path (direct loops, no column buffers, no BLAS) so the two can check each
// other elementwise in tests and race in the benchmark tool.

namespace wan::kernels::ref {

void conv2d_forward(const double* in, const double* weight, const double* bias, double* out,
                    const ConvGeom& g) {
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t co = 0; co < g.out_ch; ++co) {
      for (int64_t oh = 0; oh < g.out_h; ++oh) {
        for (int64_t ow = 0; ow < g.out_w; ++ow) {
          double acc = bias ? bias[co] : 0.0;
          for (int64_t ci = 0; ci < g.in_ch; ++ci) {
            for (int64_t kh = 0; kh < g.k_h; ++kh) {
              const int64_t ih = oh * g.stride - g.pad_top + kh;
              if (ih < 0 || ih >= g.in_h) continue;
              for (int64_t kw = 0; kw < g.k_w; ++kw) {
                const int64_t iw = ow * g.stride - g.pad_left + kw;
                if (iw < 0 || iw >= g.in_w) continue;
                acc += in[((n * g.in_ch + ci) * g.in_h + ih) * g.in_w + iw] *
                       weight[((co * g.in_ch + ci) * g.k_h + kh) * g.k_w + kw];
              }
            }
          }
          out[((n * g.out_ch + co) * g.out_h + oh) * g.out_w + ow] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const double* d_out, const double* weight, double* d_in,
                           const ConvGeom& g) {
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t co = 0; co < g.out_ch; ++co) {
      for (int64_t oh = 0; oh < g.out_h; ++oh) {
        for (int64_t ow = 0; ow < g.out_w; ++ow) {
          const double gv = d_out[((n * g.out_ch + co) * g.out_h + oh) * g.out_w + ow];
          for (int64_t ci = 0; ci < g.in_ch; ++ci) {
            for (int64_t kh = 0; kh < g.k_h; ++kh) {
              const int64_t ih = oh * g.stride - g.pad_top + kh;
              if (ih < 0 || ih >= g.in_h) continue;
              for (int64_t kw = 0; kw < g.k_w; ++kw) {
                const int64_t iw = ow * g.stride - g.pad_left + kw;
                if (iw < 0 || iw >= g.in_w) continue;
                d_in[((n * g.in_ch + ci) * g.in_h + ih) * g.in_w + iw] +=
                    gv * weight[((co * g.in_ch + ci) * g.k_h + kh) * g.k_w + kw];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const double* d_out, const double* in, double* d_weight,
                            const ConvGeom& g) {
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t co = 0; co < g.out_ch; ++co) {
      for (int64_t oh = 0; oh < g.out_h; ++oh) {
        for (int64_t ow = 0; ow < g.out_w; ++ow) {
          const double gv = d_out[((n * g.out_ch + co) * g.out_h + oh) * g.out_w + ow];
          for (int64_t ci = 0; ci < g.in_ch; ++ci) {
            for (int64_t kh = 0; kh < g.k_h; ++kh) {
              const int64_t ih = oh * g.stride - g.pad_top + kh;
              if (ih < 0 || ih >= g.in_h) continue;
              for (int64_t kw = 0; kw < g.k_w; ++kw) {
                const int64_t iw = ow * g.stride - g.pad_left + kw;
                if (iw < 0 || iw >= g.in_w) continue;
                d_weight[((co * g.in_ch + ci) * g.k_h + kh) * g.k_w + kw] +=
                    gv * in[((n * g.in_ch + ci) * g.in_h + ih) * g.in_w + iw];
              }
            }
          }
        }
      }
    }
  }
}

void maxpool_forward(const double* in, double* out, int64_t* argmax, int64_t n, int64_t c,
                     int64_t h, int64_t w, int64_t window) {
  const int64_t oh = h / window, ow = w / window;
  for (int64_t p = 0; p < n * c; ++p) {
    const double* src = in + p * h * w;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        int64_t best_idx = (y * window) * w + x * window;
        double best = src[best_idx];
        for (int64_t dy = 0; dy < window; ++dy) {
          for (int64_t dx = 0; dx < window; ++dx) {
            const int64_t idx = (y * window + dy) * w + (x * window + dx);
            if (src[idx] > best) {
              best = src[idx];
              best_idx = idx;
            }
          }
        }
        out[p * oh * ow + y * ow + x] = best;
        argmax[p * oh * ow + y * ow + x] = p * h * w + best_idx;
      }
    }
  }
}

void bilinear_forward(const double* in, double* out, int64_t n, int64_t c, int64_t in_h,
                      int64_t in_w, int64_t out_h, int64_t out_w) {
  const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
  for (int64_t p = 0; p < n * c; ++p) {
    const double* src = in + p * in_h * in_w;
    double* dst = out + p * out_h * out_w;
    for (int64_t y = 0; y < out_h; ++y) {
      const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
      int64_t y0 = static_cast<int64_t>(std::floor(fy));
      double wy = fy - static_cast<double>(y0);
      int64_t y1 = y0 + 1;
      if (y0 < 0) { y0 = y1 = 0; wy = 0.0; }
      if (y1 > in_h - 1) { y1 = in_h - 1; if (y0 > y1) y0 = y1; if (y0 == y1) wy = 0.0; }
      for (int64_t x = 0; x < out_w; ++x) {
        const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
        int64_t x0 = static_cast<int64_t>(std::floor(fx));
        double wx = fx - static_cast<double>(x0);
        int64_t x1 = x0 + 1;
        if (x0 < 0) { x0 = x1 = 0; wx = 0.0; }
        if (x1 > in_w - 1) { x1 = in_w - 1; if (x0 > x1) x0 = x1; if (x0 == x1) wx = 0.0; }
        const double top = src[y0 * in_w + x0] * (1.0 - wx) + src[y0 * in_w + x1] * wx;
        const double bot = src[y1 * in_w + x0] * (1.0 - wx) + src[y1 * in_w + x1] * wx;
        dst[y * out_w + x] = top * (1.0 - wy) + bot * wy;
      }
    }
  }
}

void dense_forward(const double* x, const double* weight, const double* bias, double* out,
                   int64_t n, int64_t in_f, int64_t out_f) {
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < out_f; ++j) {
      double acc = bias ? bias[j] : 0.0;
      for (int64_t f = 0; f < in_f; ++f) acc += x[i * in_f + f] * weight[f * out_f + j];
      out[i * out_f + j] = acc;
    }
  }
}

}  // namespace wan::kernels::ref
