#pragma once

#include <cstdint>

// Raw numeric kernels on NCHW buffers. The default namespace holds the
// OpenMP-parallel implementations (inner products via BLAS); kernels::ref
// holds serial naive versions used as the testing reference and in the
// benchmark tool. Both produce bit-identical results for any thread count:
// parallel loops only ever write disjoint output regions and every
// accumulation runs in a fixed serial order.
//
// All backward kernels ACCUMULATE (+=) into their destination buffers.

namespace wan::kernels {

struct ConvGeom {
  int64_t batch, in_ch, in_h, in_w;
  int64_t out_ch, k_h, k_w;
  int64_t stride;
  int64_t pad_top, pad_left;
  int64_t out_h, out_w;

  int64_t patch_len() const { return in_ch * k_h * k_w; }
};

void conv2d_forward(const double* in, const double* weight, const double* bias, double* out,
                    const ConvGeom& g);
void conv2d_backward_input(const double* d_out, const double* weight, double* d_in,
                           const ConvGeom& g);
void conv2d_backward_weight(const double* d_out, const double* in, double* d_weight,
                            const ConvGeom& g);
void conv2d_backward_bias(const double* d_out, double* d_bias, const ConvGeom& g);

// window == stride; ties resolve to the first maximum in row-major window order.
void maxpool_forward(const double* in, double* out, int64_t* argmax, int64_t n, int64_t c,
                     int64_t h, int64_t w, int64_t window);
void maxpool_backward(const double* d_out, const int64_t* argmax, double* d_in, int64_t n,
                      int64_t c, int64_t h, int64_t w, int64_t window);

void avgpool_forward(const double* in, double* out, int64_t n, int64_t c, int64_t h, int64_t w,
                     int64_t window);
void avgpool_backward(const double* d_out, double* d_in, int64_t n, int64_t c, int64_t h,
                      int64_t w, int64_t window);

// align_corners = false sampling on both paths.
void bilinear_forward(const double* in, double* out, int64_t n, int64_t c, int64_t in_h,
                      int64_t in_w, int64_t out_h, int64_t out_w);
void bilinear_backward(const double* d_out, double* d_in, int64_t n, int64_t c, int64_t in_h,
                       int64_t in_w, int64_t out_h, int64_t out_w);

void nearest_up_forward(const double* in, double* out, int64_t n, int64_t c, int64_t h, int64_t w,
                        int64_t factor);
void nearest_up_backward(const double* d_out, double* d_in, int64_t n, int64_t c, int64_t h,
                         int64_t w, int64_t factor);

// x: [n, in_f], weight: [in_f, out_f], bias: [out_f], out: [n, out_f]
void dense_forward(const double* x, const double* weight, const double* bias, double* out,
                   int64_t n, int64_t in_f, int64_t out_f);
void dense_backward_input(const double* d_out, const double* weight, double* d_x, int64_t n,
                          int64_t in_f, int64_t out_f);
void dense_backward_weight(const double* d_out, const double* x, double* d_weight, int64_t n,
                           int64_t in_f, int64_t out_f);
void dense_backward_bias(const double* d_out, double* d_bias, int64_t n, int64_t out_f);

namespace ref {

void conv2d_forward(const double* in, const double* weight, const double* bias, double* out,
                    const ConvGeom& g);
void conv2d_backward_input(const double* d_out, const double* weight, double* d_in,
                           const ConvGeom& g);
void conv2d_backward_weight(const double* d_out, const double* in, double* d_weight,
                            const ConvGeom& g);

void maxpool_forward(const double* in, double* out, int64_t* argmax, int64_t n, int64_t c,
                     int64_t h, int64_t w, int64_t window);
void bilinear_forward(const double* in, double* out, int64_t n, int64_t c, int64_t in_h,
                      int64_t in_w, int64_t out_h, int64_t out_w);
void dense_forward(const double* x, const double* weight, const double* bias, double* out,
                   int64_t n, int64_t in_f, int64_t out_f);

}  // namespace ref

}  // namespace wan::kernels
