// Benchmarks the downward grid tabulation: OpenMP path vs the serial
// reference, verifying bit-identical output along the way.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "liftbp/bp.hpp"

using namespace liftbp;
using Clock = std::chrono::steady_clock;

namespace {

double run(const DownwardKernel& k, const GridSpec& grid, bool parallel,
           int reps, std::vector<double>& out) {
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) out = tabulate_downward(k, grid, parallel);
    auto t1 = Clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
    int n = argc > 1 ? std::atoi(argv[1]) : 200001;
    int reps = argc > 2 ? std::atoi(argv[2]) : 20;
    if (n < 3 || reps < 1) {
        std::fprintf(stderr, "usage: %s [grid-points] [reps]\n", argv[0]);
        return 2;
    }

    // Downward message through z = mul(x, y) to x, marginalizing y, against
    // a quadratic (Gaussian) output message.
    GridSpec out_grid{5.0, 7.0, 4097};
    GridLog output{out_grid, std::vector<double>(out_grid.n)};
    for (int i = 0; i < out_grid.n; ++i) {
        double t = (out_grid.x(i) - 6.0) / 0.05;
        output.logvals[i] = -0.5 * t * t;
    }

    DownwardKernel k;
    k.op = {OpKind::Mul, 0.0};
    k.arity = 2;
    k.target_slot = 0;
    k.marginalized = {{1, GaussianParam{3.0, 0.02}}};
    k.output_msg = &output;
    k.quad_nodes = 9;

    GridSpec grid{1.0, 3.0, n};
    std::vector<double> serial_out, parallel_out;
    double ts = run(k, grid, false, reps, serial_out);
    double tp = run(k, grid, true, reps, parallel_out);

    bool identical = serial_out == parallel_out;
    std::printf("grid points   : %d\n", n);
    std::printf("reps          : %d\n", reps);
    std::printf("serial        : %9.3f ms\n", ts * 1e3);
    std::printf("openmp        : %9.3f ms\n", tp * 1e3);
    std::printf("speedup       : %9.2fx\n", ts / tp);
    std::printf("bit-identical : %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
