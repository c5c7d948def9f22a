#pragma once

#include <vector>

#include "consingan/tensor.hpp"

namespace consingan::kernels {

// Every kernel has two paths: a plain serial reference and an OpenMP/SIMD
// fast path. Both compute each output element as the same fixed-order
// reduction, so the fast path is bit-reproducible for any thread count;
// tests compare the two paths, production code uses default_exec().
enum class Exec { serial, parallel };

Exec& default_exec();

// --- matrix products (row-major) ---

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, Exec exec);

// C[M,K] += A[M,N] * B[K,N]^T   (rows of A dotted with rows of B)
void gemm_abt(int m, int k, int n, const float* a, const float* b, float* c, Exec exec);

// --- convolution, 3x3-class, stride 1, zero padding ---

std::vector<int> conv2d_out_shape(const std::vector<int>& x_shape,
                                  const std::vector<int>& w_shape, int pad);

// x {Ci,H,W}, w {Co,Ci,Kh,Kw}, bias nullable (size Co) -> y {Co,H',W'}
void conv2d(const Tensor& x, const Tensor& w, const float* bias, int pad, Tensor& y, Exec exec);

// gw {Co,Ci,Kh,Kw} = correlation of x with gy
void conv2d_wgrad(const Tensor& x, const Tensor& gy, int pad, Tensor& gw, Exec exec);

// {Co,Ci,Kh,Kw} -> {Ci,Co,Kh,Kw} with spatially flipped taps; conv2d with the
// result and pad K-1-p is the adjoint of conv2d w.r.t. its input.
Tensor flip_swap(const Tensor& w);

// --- reflection padding (p < min(H,W)) ---

void reflect_pad(const Tensor& x, int p, Tensor& y, Exec exec);
void reflect_pad_adjoint(const Tensor& gy, int p, Tensor& gx, Exec exec);

// --- separable bicubic resize, anti-aliased when downscaling ---

struct ResizeAxisPlan {
    int in_len = 0;
    int out_len = 0;
    std::vector<int> start;       // first input tap per output index
    std::vector<int> count;       // taps per output index
    std::vector<int> offset;      // into weights, per output index
    std::vector<float> weights;
};

ResizeAxisPlan make_axis_plan(int in_len, int out_len);

// x {C,H,W} -> y {C,out_h,out_w}
void resize(const Tensor& x, int out_h, int out_w, Tensor& y, Exec exec);
// adjoint: gy {C,out_h,out_w} -> gx {C,in_h,in_w}
void resize_adjoint(const Tensor& gy, int in_h, int in_w, Tensor& gx, Exec exec);

// --- reductions ---

// Serial double-accumulated sum; used for all loss reductions so results do
// not depend on thread count.
double sum(const float* x, size_t n);

}  // namespace consingan::kernels
