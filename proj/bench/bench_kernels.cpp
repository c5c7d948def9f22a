// Compares the serial reference kernels against the OpenMP/SIMD fast path
// at the shapes that dominate training. Default sizes finish in seconds;
// --full runs the real stage resolutions.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "consingan/kernels.hpp"
#include "consingan/rng.hpp"

using namespace consingan;
using kernels::Exec;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

Tensor random_tensor(std::vector<int> shape, RngStream& rng) {
    Tensor t(std::move(shape));
    for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal_f();
    return t;
}

void bench_conv(int c, int h, int w, int reps) {
    RngStream rng(1);
    const Tensor x = random_tensor({c, h, w}, rng);
    const Tensor wt = random_tensor({c, c, 3, 3}, rng);
    Tensor y;
    const double flops = 2.0 * c * c * 9.0 * h * w;

    const double serial =
        time_ms([&] { kernels::conv2d(x, wt, nullptr, 1, y, Exec::serial); }, reps);
    const double parallel =
        time_ms([&] { kernels::conv2d(x, wt, nullptr, 1, y, Exec::parallel); }, reps);
    std::printf("conv2d %3dx%3dx%3d  serial %8.2f ms (%5.1f GFLOP/s)  fast %8.2f ms (%5.1f "
                "GFLOP/s)  speedup %.1fx\n",
                c, h, w, serial, flops / serial / 1e6, parallel, flops / parallel / 1e6,
                serial / parallel);
}

void bench_wgrad(int c, int h, int w, int reps) {
    RngStream rng(2);
    const Tensor x = random_tensor({c, h, w}, rng);
    const Tensor gy = random_tensor({c, h, w}, rng);
    Tensor gw({c, c, 3, 3});
    const double flops = 2.0 * c * c * 9.0 * h * w;

    const double serial =
        time_ms([&] { kernels::conv2d_wgrad(x, gy, 1, gw, Exec::serial); }, reps);
    const double parallel =
        time_ms([&] { kernels::conv2d_wgrad(x, gy, 1, gw, Exec::parallel); }, reps);
    std::printf("wgrad  %3dx%3dx%3d  serial %8.2f ms (%5.1f GFLOP/s)  fast %8.2f ms (%5.1f "
                "GFLOP/s)  speedup %.1fx\n",
                c, h, w, serial, flops / serial / 1e6, parallel, flops / parallel / 1e6,
                serial / parallel);
}

void bench_resize(int c, int h, int w, int oh, int ow, int reps) {
    RngStream rng(3);
    const Tensor x = random_tensor({c, h, w}, rng);
    Tensor y;
    const double serial = time_ms([&] { kernels::resize(x, oh, ow, y, Exec::serial); }, reps);
    const double parallel = time_ms([&] { kernels::resize(x, oh, ow, y, Exec::parallel); }, reps);
    std::printf("resize %3dx%3dx%3d -> %3dx%3d  serial %8.2f ms  fast %8.2f ms  speedup %.1fx\n",
                c, h, w, oh, ow, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
    const bool full = argc > 1 && std::strcmp(argv[1], "--full") == 0;
    if (full) {
        // real stage shapes of a 188x250 six-stage run at F=64
        for (auto [h, w] : {std::pair{25, 34}, {63, 84}, {126, 167}, {188, 250}}) {
            bench_conv(64, h, w, 3);
            bench_wgrad(64, h, w, 3);
        }
        bench_resize(64, 126, 167, 188, 250, 10);
    } else {
        bench_conv(32, 64, 64, 5);
        bench_wgrad(32, 64, 64, 5);
        bench_resize(32, 40, 50, 64, 80, 20);
    }
    return 0;
}
