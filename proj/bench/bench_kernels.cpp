// Serial-vs-parallel kernel benchmark. Each kernel runs in both execution
// modes on the same inputs; the harness reports wall times, the speedup, and
// verifies the outputs are bitwise identical (the modes only change the loop
// driver, never the arithmetic).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#include "dpsinkhorn/kernels.hpp"
#include "dpsinkhorn/nn.hpp"
#include "dpsinkhorn/ot.hpp"
#include "dpsinkhorn/privacy.hpp"
#include "dpsinkhorn/rng.hpp"

using namespace dpsinkhorn;

namespace {

double seconds(std::function<void()> fn, int repeats) {
    using clock = std::chrono::steady_clock;
    fn();  // warm-up, excluded
    const auto t0 = clock::now();
    for (int r = 0; r < repeats; ++r) fn();
    const auto t1 = clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / repeats;
}

Matrix random_matrix(size_t rows, size_t cols, CounterRng& rng) {
    Matrix m(rows, cols);
    for (size_t i = 0; i < rows * cols; ++i) m.data()[i] = rng.next_gaussian();
    return m;
}

struct Case {
    std::string name;
    std::function<Matrix(Exec)> run;
    int repeats;
};

void report(const Case& c) {
    Matrix serial_out, parallel_out;
    const double ts = seconds([&] { serial_out = c.run(Exec::kSerial); }, c.repeats);
    const double tp = seconds([&] { parallel_out = c.run(Exec::kParallel); }, c.repeats);
    const bool identical = serial_out == parallel_out;
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   bitwise %s\n",
                c.name.c_str(), ts * 1e3, tp * 1e3, ts / tp, identical ? "OK" : "MISMATCH");
    if (!identical) std::exit(1);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) set_max_threads(std::atoi(argv[1]));
    std::printf("threads: %d\n", max_threads());

    CounterRng rng(42);
    const size_t n = 256, m = 256, d = 32;
    Matrix X = random_matrix(n, d, rng);
    Matrix Y = random_matrix(m, d, rng);
    Vector a = uniform_weights(n), b = uniform_weights(m);

    CostMatrix C = cost_matrix(X, Y, 1.0);
    DualPotentials pot = sinkhorn_potentials(C, a, b, 1.0, 2000, 1e-6);
    TransportPlan P = transport_plan(pot, C, a, b);

    report({"cost_matrix 256x256 d=32", [&](Exec e) { return cost_matrix(X, Y, 1.0, e).values; }, 20});
    report({"sinkhorn 256x256 lam=1",
            [&](Exec e) {
                DualPotentials p = sinkhorn_potentials(C, a, b, 1.0, 2000, 1e-6, e);
                Matrix out(2, n);
                for (size_t i = 0; i < n; ++i) {
                    out(0, i) = p.f[i];
                    out(1, i) = p.g[i];
                }
                return out;
            },
            3});
    report({"sample_gradient 256x256", [&](Exec e) { return sample_gradient(X, Y, P, 1.0, 2.0, e); }, 20});

    const MlpArch arch{12 + 3, {128, 128}, d};
    CounterRng init(7);
    GeneratorParams theta = init_generator(arch, init);
    Matrix z = random_matrix(n, 12, rng);
    std::vector<uint32_t> labels(n);
    for (size_t i = 0; i < n; ++i) labels[i] = static_cast<uint32_t>(i % 3);
    Matrix upstream = random_matrix(n, d, rng);

    report({"generate 256 rows", [&](Exec e) { return generate(theta, z, labels, 3, e); }, 20});
    report({"backprop 256 rows",
            [&](Exec e) {
                GeneratorGrads grads = backprop_to_params(theta, z, labels, 3, upstream, e);
                Vector flat = flatten_grads(grads);
                Matrix out(1, flat.size());
                std::memcpy(out.data(), flat.data(), flat.size() * sizeof(double));
                return out;
            },
            10});

    SanitizerConfig scfg;
    report({"sanitize 256 rows",
            [&](Exec e) {
                CounterRng noise(99);
                return sanitize(upstream, scfg, n / 2, noise, e);
            },
            50});

    return 0;
}
