#include "consingan/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace consingan::kernels {

Exec& default_exec() {
    static Exec mode = Exec::parallel;
    return mode;
}

// ---------------------------------------------------------------------------
// GEMM
// ---------------------------------------------------------------------------

namespace {

constexpr int kJTile = 1024;

// j-tiled ikj kernel with 4-row unroll; each C element accumulates over k in
// a fixed order, independent of tiling and threading.
void gemm_nn_tile(int m, int n, int k, const float* a, const float* b, float* c,
                  int j0, int j1) {
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        float* c0 = c + static_cast<size_t>(i + 0) * n;
        float* c1 = c + static_cast<size_t>(i + 1) * n;
        float* c2 = c + static_cast<size_t>(i + 2) * n;
        float* c3 = c + static_cast<size_t>(i + 3) * n;
        for (int kk = 0; kk < k; ++kk) {
            const float a0 = a[(i + 0) * k + kk];
            const float a1 = a[(i + 1) * k + kk];
            const float a2 = a[(i + 2) * k + kk];
            const float a3 = a[(i + 3) * k + kk];
            const float* brow = b + static_cast<size_t>(kk) * n;
#pragma omp simd
            for (int j = j0; j < j1; ++j) {
                const float bv = brow[j];
                c0[j] += a0 * bv;
                c1[j] += a1 * bv;
                c2[j] += a2 * bv;
                c3[j] += a3 * bv;
            }
        }
    }
    for (; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const float av = a[i * k + kk];
            const float* brow = b + static_cast<size_t>(kk) * n;
#pragma omp simd
            for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, Exec exec) {
    if (exec == Exec::serial) {
        // reference: plain triple loop
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                float acc = c[static_cast<size_t>(i) * n + j];
                for (int kk = 0; kk < k; ++kk)
                    acc += a[static_cast<size_t>(i) * k + kk] * b[static_cast<size_t>(kk) * n + j];
                c[static_cast<size_t>(i) * n + j] = acc;
            }
        return;
    }
    const int ntiles = (n + kJTile - 1) / kJTile;
#pragma omp parallel for schedule(static)
    for (int t = 0; t < ntiles; ++t) {
        const int j0 = t * kJTile;
        const int j1 = std::min(n, j0 + kJTile);
        gemm_nn_tile(m, n, k, a, b, c, j0, j1);
    }
}

void gemm_abt(int m, int k, int n, const float* a, const float* b, float* c, Exec exec) {
    if (exec == Exec::serial) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < k; ++j) {
                float acc = c[static_cast<size_t>(i) * k + j];
                for (int p = 0; p < n; ++p)
                    acc += a[static_cast<size_t>(i) * n + p] * b[static_cast<size_t>(j) * n + p];
                c[static_cast<size_t>(i) * k + j] = acc;
            }
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * n;
        for (int j = 0; j < k; ++j) {
            const float* brow = b + static_cast<size_t>(j) * n;
            float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
            for (int p = 0; p < n; ++p) acc += arow[p] * brow[p];
            c[static_cast<size_t>(i) * k + j] += acc;
        }
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

std::vector<int> conv2d_out_shape(const std::vector<int>& x_shape,
                                  const std::vector<int>& w_shape, int pad) {
    if (x_shape.size() != 3 || w_shape.size() != 4)
        throw InvalidArgumentError("conv2d expects x {C,H,W}, w {Co,Ci,Kh,Kw}");
    if (x_shape[0] != w_shape[1])
        throw InvalidArgumentError("conv2d channel mismatch: x " + shape_str(x_shape) +
                                   " vs w " + shape_str(w_shape));
    const int oh = x_shape[1] + 2 * pad - w_shape[2] + 1;
    const int ow = x_shape[2] + 2 * pad - w_shape[3] + 1;
    if (oh < 1 || ow < 1)
        throw InvalidArgumentError("conv2d input smaller than kernel: x " + shape_str(x_shape));
    return {w_shape[0], oh, ow};
}

namespace {

// cols {Ci*Kh*Kw, OH*OW} for stride-1 zero-padded convolution
void im2col(const Tensor& x, int kh, int kw, int pad, int oh, int ow,
            std::vector<float>& cols, Exec exec) {
    const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
    cols.assign(static_cast<size_t>(ci) * kh * kw * oh * ow, 0.0f);
    const int rows = ci * kh * kw;
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int r = 0; r < rows; ++r) {
        const int c = r / (kh * kw);
        const int dy = (r / kw) % kh;
        const int dx = r % kw;
        const float* src = x.data() + static_cast<size_t>(c) * h * w;
        float* dst = cols.data() + static_cast<size_t>(r) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const int sy = y + dy - pad;
            if (sy < 0 || sy >= h) continue;
            const int x0 = std::max(0, pad - dx);
            const int x1 = std::min(ow, w + pad - dx);
            const float* srow = src + static_cast<size_t>(sy) * w + (x0 + dx - pad);
            std::memcpy(dst + static_cast<size_t>(y) * ow + x0, srow,
                        static_cast<size_t>(std::max(0, x1 - x0)) * sizeof(float));
        }
    }
}

void conv2d_serial(const Tensor& x, const Tensor& w, const float* bias, int pad, Tensor& y) {
    const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int oh = y.dim(1), ow = y.dim(2);
    for (int o = 0; o < co; ++o) {
        for (int yy = 0; yy < oh; ++yy) {
            for (int xx = 0; xx < ow; ++xx) {
                float acc = bias ? bias[o] : 0.0f;
                for (int c = 0; c < ci; ++c) {
                    for (int dy = 0; dy < kh; ++dy) {
                        const int sy = yy + dy - pad;
                        if (sy < 0 || sy >= h) continue;
                        for (int dx = 0; dx < kw; ++dx) {
                            const int sx = xx + dx - pad;
                            if (sx < 0 || sx >= wd) continue;
                            acc += x.at(c, sy, sx) *
                                   w[((static_cast<size_t>(o) * ci + c) * kh + dy) * kw + dx];
                        }
                    }
                }
                y.at(o, yy, xx) = acc;
            }
        }
    }
}

}  // namespace

void conv2d(const Tensor& x, const Tensor& w, const float* bias, int pad, Tensor& y, Exec exec) {
    const auto oshape = conv2d_out_shape(x.shape(), w.shape(), pad);
    if (y.shape() != oshape) y = Tensor(oshape);
    if (exec == Exec::serial) {
        conv2d_serial(x, w, bias, pad, y);
        return;
    }
    const int co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int oh = oshape[1], ow = oshape[2];
    const int positions = oh * ow;
    thread_local std::vector<float> cols;
    im2col(x, kh, kw, pad, oh, ow, cols, exec);
    if (bias) {
#pragma omp parallel for schedule(static)
        for (int o = 0; o < co; ++o)
            std::fill_n(y.data() + static_cast<size_t>(o) * positions, positions, bias[o]);
    } else {
        std::fill_n(y.data(), y.numel(), 0.0f);
    }
    gemm_nn(co, positions, ci * kh * kw, w.data(), cols.data(), y.data(), exec);
}

void conv2d_wgrad(const Tensor& x, const Tensor& gy, int pad, Tensor& gw, Exec exec) {
    const int ci = x.dim(0);
    const int co = gy.dim(0), oh = gy.dim(1), ow = gy.dim(2);
    const int kh = gw.dim(2), kw = gw.dim(3);
    std::fill_n(gw.data(), gw.numel(), 0.0f);
    if (exec == Exec::serial) {
        const int h = x.dim(1), wd = x.dim(2);
        for (int o = 0; o < co; ++o)
            for (int c = 0; c < ci; ++c)
                for (int dy = 0; dy < kh; ++dy)
                    for (int dx = 0; dx < kw; ++dx) {
                        float acc = 0.0f;
                        for (int yy = 0; yy < oh; ++yy) {
                            const int sy = yy + dy - pad;
                            if (sy < 0 || sy >= h) continue;
                            for (int xx = 0; xx < ow; ++xx) {
                                const int sx = xx + dx - pad;
                                if (sx < 0 || sx >= wd) continue;
                                acc += x.at(c, sy, sx) * gy.at(o, yy, xx);
                            }
                        }
                        gw[((static_cast<size_t>(o) * ci + c) * kh + dy) * kw + dx] = acc;
                    }
        return;
    }
    thread_local std::vector<float> cols;
    im2col(x, kh, kw, pad, oh, ow, cols, exec);
    // gw[Co, Ci*Kh*Kw] = gy[Co, P] * cols[Ci*Kh*Kw, P]^T
    gemm_abt(co, ci * kh * kw, oh * ow, gy.data(), cols.data(), gw.data(), exec);
}

Tensor flip_swap(const Tensor& w) {
    const int co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    Tensor out({ci, co, kh, kw});
    for (int o = 0; o < co; ++o)
        for (int c = 0; c < ci; ++c)
            for (int dy = 0; dy < kh; ++dy)
                for (int dx = 0; dx < kw; ++dx)
                    out[((static_cast<size_t>(c) * co + o) * kh + (kh - 1 - dy)) * kw +
                        (kw - 1 - dx)] =
                        w[((static_cast<size_t>(o) * ci + c) * kh + dy) * kw + dx];
    return out;
}

// ---------------------------------------------------------------------------
// Reflection padding
// ---------------------------------------------------------------------------

namespace {
inline int reflect_idx(int i, int len) {
    if (i < 0) return -i;
    if (i >= len) return 2 * len - 2 - i;
    return i;
}
}  // namespace

void reflect_pad(const Tensor& x, int p, Tensor& y, Exec exec) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h < 2 || w < 2) throw InvalidArgumentError("reflect_pad needs sides >= 2");
    const int oh = h + 2 * p, ow = w + 2 * p;
    if (y.shape() != std::vector<int>{c, oh, ow}) y = Tensor({c, oh, ow});
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int cc = 0; cc < c; ++cc)
        for (int yy = 0; yy < oh; ++yy) {
            const int sy = reflect_idx(yy - p, h);
            for (int xx = 0; xx < ow; ++xx)
                y.at(cc, yy, xx) = x.at(cc, sy, reflect_idx(xx - p, w));
        }
}

void reflect_pad_adjoint(const Tensor& gy, int p, Tensor& gx, Exec exec) {
    const int c = gy.dim(0), oh = gy.dim(1), ow = gy.dim(2);
    const int h = oh - 2 * p, w = ow - 2 * p;
    if (gx.shape() != std::vector<int>{c, h, w}) throw InternalError("reflect_pad_adjoint shape");
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int cc = 0; cc < c; ++cc) {
        for (int yy = 0; yy < oh; ++yy) {
            const int sy = reflect_idx(yy - p, h);
            for (int xx = 0; xx < ow; ++xx)
                gx.at(cc, sy, reflect_idx(xx - p, w)) += gy.at(cc, yy, xx);
        }
    }
}

// ---------------------------------------------------------------------------
// Resize
// ---------------------------------------------------------------------------

namespace {

// Keys cubic, a = -0.5 (Catmull-Rom)
double cubic_kernel(double t) {
    constexpr double a = -0.5;
    t = std::fabs(t);
    if (t < 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0);
    return 0.0;
}

}  // namespace

ResizeAxisPlan make_axis_plan(int in_len, int out_len) {
    if (in_len < 1 || out_len < 1) throw InvalidArgumentError("resize length < 1");
    ResizeAxisPlan plan;
    plan.in_len = in_len;
    plan.out_len = out_len;
    plan.start.resize(out_len);
    plan.count.resize(out_len);
    plan.offset.resize(out_len);
    const double scale = static_cast<double>(in_len) / out_len;
    const double fscale = std::max(1.0, scale);  // widen the kernel when downscaling
    const double support = 2.0 * fscale;
    for (int o = 0; o < out_len; ++o) {
        const double center = (o + 0.5) * scale - 0.5;
        int lo = static_cast<int>(std::ceil(center - support));
        int hi = static_cast<int>(std::floor(center + support));
        std::vector<double> w;
        double wsum = 0.0;
        for (int i = lo; i <= hi; ++i) {
            const double kv = cubic_kernel((i - center) / fscale);
            w.push_back(kv);
            wsum += kv;
        }
        plan.offset[o] = static_cast<int>(plan.weights.size());
        plan.start[o] = std::clamp(lo, 0, in_len - 1);
        // clamp taps to the valid range (edge replication), merging weights
        const int first = plan.start[o];
        const int last = std::clamp(hi, 0, in_len - 1);
        plan.count[o] = last - first + 1;
        std::vector<double> merged(static_cast<size_t>(plan.count[o]), 0.0);
        for (int i = lo; i <= hi; ++i) {
            const int ci = std::clamp(i, 0, in_len - 1);
            merged[static_cast<size_t>(ci - first)] += w[static_cast<size_t>(i - lo)];
        }
        for (double mv : merged)
            plan.weights.push_back(static_cast<float>(mv / wsum));
    }
    return plan;
}

namespace {

// one axis of the separable resize along the last (contiguous) dimension;
// x is treated as {rows, in_len} -> y {rows, out_len}
void resize_axis(const float* x, float* y, int rows, const ResizeAxisPlan& plan, Exec exec) {
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int r = 0; r < rows; ++r) {
        const float* src = x + static_cast<size_t>(r) * plan.in_len;
        float* dst = y + static_cast<size_t>(r) * plan.out_len;
        for (int o = 0; o < plan.out_len; ++o) {
            const float* w = plan.weights.data() + plan.offset[o];
            const float* s = src + plan.start[o];
            float acc = 0.0f;
            for (int t = 0; t < plan.count[o]; ++t) acc += w[t] * s[t];
            dst[o] = acc;
        }
    }
}

// adjoint along the last dimension: y {rows, in_len} += plan^T applied to x {rows, out_len}
void resize_axis_adjoint(const float* gy, float* gx, int rows, const ResizeAxisPlan& plan,
                         Exec exec) {
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int r = 0; r < rows; ++r) {
        const float* src = gy + static_cast<size_t>(r) * plan.out_len;
        float* dst = gx + static_cast<size_t>(r) * plan.in_len;
        for (int o = 0; o < plan.out_len; ++o) {
            const float* w = plan.weights.data() + plan.offset[o];
            float* d = dst + plan.start[o];
            const float g = src[o];
            for (int t = 0; t < plan.count[o]; ++t) d[t] += w[t] * g;
        }
    }
}

// transpose {rows, cols} blocks per channel: x {C, R, L} -> y {C, L, R}
void transpose_hw(const float* x, float* y, int c, int r, int l, Exec exec) {
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int cc = 0; cc < c; ++cc) {
        const float* src = x + static_cast<size_t>(cc) * r * l;
        float* dst = y + static_cast<size_t>(cc) * r * l;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < l; ++j)
                dst[static_cast<size_t>(j) * r + i] = src[static_cast<size_t>(i) * l + j];
    }
}

}  // namespace

void resize(const Tensor& x, int out_h, int out_w, Tensor& y, Exec exec) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const auto wplan = make_axis_plan(w, out_w);
    const auto hplan = make_axis_plan(h, out_h);
    // rows pass
    Tensor tmp({c, h, out_w});
    resize_axis(x.data(), tmp.data(), c * h, wplan, exec);
    // columns pass via transpose
    Tensor tmp_t({c, out_w, h});
    transpose_hw(tmp.data(), tmp_t.data(), c, h, out_w, exec);
    Tensor out_t({c, out_w, out_h});
    resize_axis(tmp_t.data(), out_t.data(), c * out_w, hplan, exec);
    if (y.shape() != std::vector<int>{c, out_h, out_w}) y = Tensor({c, out_h, out_w});
    transpose_hw(out_t.data(), y.data(), c, out_w, out_h, exec);
}

void resize_adjoint(const Tensor& gy, int in_h, int in_w, Tensor& gx, Exec exec) {
    const int c = gy.dim(0), oh = gy.dim(1), ow = gy.dim(2);
    const auto wplan = make_axis_plan(in_w, ow);
    const auto hplan = make_axis_plan(in_h, oh);
    // reverse of the forward pipeline: columns adjoint, then rows adjoint
    Tensor gy_t({c, ow, oh});
    transpose_hw(gy.data(), gy_t.data(), c, oh, ow, exec);
    Tensor tmp_t({c, ow, in_h}, 0.0f);
    resize_axis_adjoint(gy_t.data(), tmp_t.data(), c * ow, hplan, exec);
    Tensor tmp({c, in_h, ow});
    transpose_hw(tmp_t.data(), tmp.data(), c, ow, in_h, exec);
    if (gx.shape() != std::vector<int>{c, in_h, in_w}) gx = Tensor({c, in_h, in_w});
    std::fill_n(gx.data(), gx.numel(), 0.0f);
    resize_axis_adjoint(tmp.data(), gx.data(), c * in_h, wplan, exec);
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

double sum(const float* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace consingan::kernels
