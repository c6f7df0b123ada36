// Benchmark comparing the serial reference kernels against the
// OpenMP-parallel ones, and single- vs multi-threaded batch evaluation.
// Parallel results must be bitwise identical to serial: parallelism is over
// independent output elements only.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "ieq/evaluation.hpp"
#include "ieq/kernels.hpp"
#include "ieq/matrix.hpp"
#include "ieq/models.hpp"
#include "ieq/pipeline.hpp"
#include "ieq/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

ieq::Matrix random_matrix(std::size_t rows, std::size_t cols, ieq::CounterRng& rng) {
    ieq::Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
    return m;
}

bool bitwise_equal(const ieq::Matrix& a, const ieq::Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

void bench_matmul(std::size_t n, int threads, int reps) {
    ieq::CounterRng rng(11);
    const ieq::Matrix a = random_matrix(n, n, rng);
    const ieq::Matrix b = random_matrix(n, n, rng);

    ieq::Matrix ref;
    auto start = Clock::now();
    for (int r = 0; r < reps; ++r) ref = ieq::serial::matmul(a, b);
    const double serial_s = seconds_since(start) / reps;

    ieq::set_max_threads(threads);
    ieq::Matrix par;
    start = Clock::now();
    for (int r = 0; r < reps; ++r) par = ieq::matmul(a, b);
    const double parallel_s = seconds_since(start) / reps;
    ieq::set_max_threads(1);

    std::printf("matmul %4zux%-4zu  serial %8.4f s  omp(%d) %8.4f s  speedup %5.2fx  %s\n", n,
                n, serial_s, threads, parallel_s, serial_s / parallel_s,
                bitwise_equal(ref, par) ? "bitwise-equal" : "MISMATCH");
}

void bench_batch_eval(std::size_t samples, int threads) {
    // A GRU over synthetic windows, evaluated sample-parallel.
    ieq::ModelSpec spec;
    spec.family = ieq::Family::gru;
    spec.seed = 3;
    const ieq::ModelParams params = ieq::init_params(spec);

    ieq::WindowedDataset ds;
    ds.window = ieq::kDefaultWindow;
    ds.features = ieq::kNumFeatures;
    ieq::CounterRng rng(5);
    ds.inputs.resize(samples * ds.window * ds.features);
    ds.targets.resize(samples * ieq::kNumTargets);
    ds.sample_timestamps.resize(samples);
    for (double& v : ds.inputs) v = rng.uniform();
    for (double& v : ds.targets) v = rng.uniform();

    ieq::set_max_threads(1);
    auto start = Clock::now();
    const ieq::Matrix serial_pred = ieq::predict_all(params, ds);
    const double serial_s = seconds_since(start);

    ieq::set_max_threads(threads);
    start = Clock::now();
    const ieq::Matrix parallel_pred = ieq::predict_all(params, ds);
    const double parallel_s = seconds_since(start);
    ieq::set_max_threads(1);

    std::printf("batch-eval %5zu samples  serial %8.4f s  omp(%d) %8.4f s  speedup %5.2fx  %s\n",
                samples, serial_s, threads, parallel_s, serial_s / parallel_s,
                bitwise_equal(serial_pred, parallel_pred) ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 2;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::size_t matmul_n = 384;
    std::size_t samples = 4096;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--threads" && i + 1 < argc) threads = std::atoi(argv[++i]);
        else if (arg == "--matmul-n" && i + 1 < argc) matmul_n = std::strtoul(argv[++i], nullptr, 10);
        else if (arg == "--samples" && i + 1 < argc) samples = std::strtoul(argv[++i], nullptr, 10);
        else {
            std::printf("usage: %s [--threads N] [--matmul-n N] [--samples N]\n", argv[0]);
            return 1;
        }
    }

    std::printf("kernel benchmark, %d threads\n", threads);
    bench_matmul(matmul_n / 2, threads, 3);
    bench_matmul(matmul_n, threads, 3);
    bench_batch_eval(samples, threads);
    return 0;
}
