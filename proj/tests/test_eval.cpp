#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "dpsinkhorn/data.hpp"
#include "dpsinkhorn/errors.hpp"
#include "dpsinkhorn/eval.hpp"
#include "dpsinkhorn/matrix.hpp"
#include "dpsinkhorn/nn.hpp"
#include "dpsinkhorn/rng.hpp"
#include "test_util.hpp"

using namespace dpsinkhorn;

namespace {

Dataset blobs(size_t count, uint64_t seed) {
    CounterRng rng = CounterRng::derive(seed, Stream::kSampling);
    return synth_mixture(default_mixture_spec(), count, rng);
}

GeneratorParams fresh_generator(size_t latent_dim, size_t L, size_t out_dim, uint64_t seed) {
    MlpArch arch{latent_dim + L, {8}, out_dim};
    CounterRng rng = CounterRng::derive(seed, Stream::kInit);
    return init_generator(arch, rng);
}

}  // namespace

TEST_CASE("synthesize draws labeled generator output") {
    GeneratorParams theta = fresh_generator(4, 3, 2, 5);
    CounterRng rng = CounterRng::derive(6, Stream::kEval);
    Dataset ds = synthesize(theta, 3, 900, LatentKind::kUniform01, rng);

    REQUIRE(ds.samples.rows() == 900);
    REQUIRE(ds.samples.cols() == 2);
    REQUIRE(ds.labels.size() == 900);
    CHECK(ds.L == 3);

    std::vector<size_t> freq(3, 0);
    for (uint32_t l : ds.labels) {
        REQUIRE(l < 3);
        ++freq[l];
    }
    // Uniform labels: 300 each, 4 sigma ≈ 56.
    for (size_t c = 0; c < 3; ++c) CHECK(std::abs(double(freq[c]) - 300.0) < 60.0);

    for (size_t i = 0; i < ds.samples.rows(); ++i)
        for (size_t j = 0; j < 2; ++j) {
            CHECK(ds.samples(i, j) > -1.0);
            CHECK(ds.samples(i, j) < 1.0);
        }

    // Deterministic in the stream.
    CounterRng r1 = CounterRng::derive(6, Stream::kEval);
    CounterRng r2 = CounterRng::derive(6, Stream::kEval);
    Dataset a = synthesize(theta, 3, 20, LatentKind::kUniform01, r1);
    Dataset b = synthesize(theta, 3, 20, LatentKind::kUniform01, r2);
    for (size_t i = 0; i < 20; ++i) {
        CHECK(a.labels[i] == b.labels[i]);
        CHECK(a.samples(i, 0) == b.samples(i, 0));
    }
}

TEST_CASE("divergence_metric keys splits so identical sets cancel to exactly zero") {
    Dataset ds = blobs(60, 21);
    CounterRng rng = CounterRng::derive(3, Stream::kEval);
    DivergenceResult r = divergence_metric(ds.samples, ds.samples, 1.0, 0.0, rng, 5);
    REQUIRE(r.values.size() == 5);
    for (double v : r.values) CHECK(v == 0.0);
    CHECK(r.mean == 0.0);
    CHECK(r.std == 0.0);
}

TEST_CASE("divergence_metric orders distributions by distance") {
    Dataset ds = blobs(80, 22);
    Matrix near = ds.samples;
    Matrix far = ds.samples;
    for (size_t i = 0; i < ds.samples.rows(); ++i)
        for (size_t j = 0; j < 2; ++j) {
            near(i, j) += 0.15;
            far(i, j) += 0.9;
        }

    CounterRng rng = CounterRng::derive(4, Stream::kEval);
    SolverConfig solver{20000, 1e-8, Exec::kParallel};
    DivergenceResult dn = divergence_metric(ds.samples, near, 0.5, 0.0, rng, 6, solver);
    DivergenceResult df = divergence_metric(ds.samples, far, 0.5, 0.0, rng, 6, solver);
    CHECK(dn.mean > 0.0);
    CHECK(df.mean > dn.mean);

    // An independent draw from the same mixture sits near zero, far below the
    // shifted copies.
    Dataset other = blobs(80, 23);
    DivergenceResult same = divergence_metric(ds.samples, other.samples, 0.5, 0.0, rng, 6, solver);
    CHECK(std::abs(same.mean) < df.mean);

    SUBCASE("validation") {
        CHECK_THROWS_AS(divergence_metric(Matrix(1, 2), Matrix(9, 2), 0.5, 0.0, rng, 3),
                        ValidationError);
        CHECK_THROWS_AS(divergence_metric(ds.samples, ds.samples, 0.5, 0.0, rng, 0),
                        ValidationError);
    }
}

TEST_CASE("downstream_utility is high on faithful synthetic data, chance on shuffled labels") {
    Dataset train_set = blobs(240, 31);
    Dataset test_set = blobs(240, 32);

    ClassifierBudget budget;
    budget.iters = 200;
    const double honest = downstream_utility(train_set, test_set, ClassifierKind::kLogreg, budget, 2);
    CHECK(honest >= 0.95);

    Dataset shuffled = train_set;
    CounterRng rng(77);
    std::vector<size_t> perm = rng.permutation(shuffled.labels.size());
    for (size_t i = 0; i < shuffled.labels.size(); ++i)
        shuffled.labels[i] = train_set.labels[perm[i]];
    const double chance = downstream_utility(shuffled, test_set, ClassifierKind::kLogreg, budget, 2);
    CHECK(chance < 0.55);
    CHECK(honest > chance + 0.3);

    SUBCASE("validation") {
        Dataset wrong = train_set;
        wrong.samples = Matrix(240, 3);
        CHECK_THROWS_AS(downstream_utility(wrong, test_set, ClassifierKind::kLogreg, budget, 2),
                        ValidationError);
        CHECK_THROWS_AS(downstream_utility(train_set, test_set, ClassifierKind::kLogreg, budget, 0),
                        ValidationError);
    }
}

TEST_CASE("utility_with_generator is deterministic given the stream") {
    GeneratorParams theta = fresh_generator(4, 3, 2, 41);
    Dataset test_set = blobs(120, 42);
    ClassifierBudget budget;
    budget.iters = 80;

    CounterRng r1 = CounterRng::derive(9, Stream::kEval);
    CounterRng r2 = CounterRng::derive(9, Stream::kEval);
    const double a =
        utility_with_generator(theta, 3, LatentKind::kUniform01, 90, test_set,
                               ClassifierKind::kLogreg, budget, r1, 2);
    const double b =
        utility_with_generator(theta, 3, LatentKind::kUniform01, 90, test_set,
                               ClassifierKind::kLogreg, budget, r2, 2);
    CHECK(a == b);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
}

TEST_CASE("bias_variance_probe endpoints are exact and trends are monotone") {
    // Common-random-numbers pairing makes the endpoints algebraic identities:
    // the p=1 arm has zero distance to itself, and the p=0 arm normalizes its
    // own variance.
    Dataset ds = blobs(200, 51);
    GeneratorParams theta = fresh_generator(4, 3, 2, 52);

    ProbeConfig cfg;
    cfg.n = 16;
    cfg.lambda = 1.0;
    cfg.m_mix = 0.0;
    cfg.alpha_c = 3.0;
    cfg.solver = SolverConfig{20000, 1e-6, Exec::kParallel};

    // No SUBCASEs here: the probe is the expensive part and must run once.
    const std::vector<double> grid = {0.0, 0.4, 1.0};
    CounterRng rng = CounterRng::derive(53, Stream::kEval);
    ProbeResult probe = bias_variance_probe(theta, grid, 120, ds, rng, cfg);

    REQUIRE(probe.rows.size() == 3);
    CHECK(probe.rows[0].p == 0.0);
    CHECK(probe.rows[2].p == 1.0);

    CHECK(probe.rows[2].bias == 0.0);           // ground-truth arm, exactly
    CHECK(probe.rows[0].norm_variance == 1.0);  // self-normalized, exactly

    // Debiasing trades bias for variance monotonically across the grid.
    CHECK(probe.rows[0].bias > probe.rows[1].bias);
    CHECK(probe.rows[1].bias > 0.0);
    CHECK(probe.rows[1].norm_variance > probe.rows[0].norm_variance);
    CHECK(probe.rows[2].norm_variance > probe.rows[1].norm_variance);

    // Joint bootstrap across the p=0 / p=1 arms. The bias gap is strongly
    // significant at this sample size; the variance gap gets a looser bar
    // here (the large-sample 3-sigma claim belongs to the acceptance run).
    REQUIRE(probe.samples.size() == 3);
    CounterRng boot = CounterRng::derive(54, Stream::kEval);
    PairStats stats = probe_bootstrap(probe, grid, 0, 2, 300, boot);
    CHECK(stats.bias_a == doctest::Approx(probe.rows[0].bias).epsilon(1e-12));
    CHECK(stats.bias_b == 0.0);
    CHECK(stats.bias_diff > 0.0);
    CHECK(stats.bias_diff_sd > 0.0);
    CHECK(stats.bias_diff / stats.bias_diff_sd > 3.0);

    CHECK(stats.var_a == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats.var_b == doctest::Approx(probe.rows[2].norm_variance).epsilon(1e-12));
    CHECK(stats.var_diff > 0.0);
    CHECK(stats.var_diff / stats.var_diff_sd > 2.0);

    // keep_samples off: rows still computed, bootstrap refuses to run.
    ProbeConfig light = cfg;
    light.keep_samples = false;
    CounterRng rng2 = CounterRng::derive(53, Stream::kEval);
    ProbeResult lean = bias_variance_probe(theta, grid, 100, ds, rng2, light);
    CHECK(lean.samples.empty());
    REQUIRE(lean.rows.size() == 3);
    CHECK(lean.rows[2].bias == 0.0);
    CounterRng boot2 = CounterRng::derive(54, Stream::kEval);
    CHECK_THROWS_AS(probe_bootstrap(lean, grid, 0, 2, 10, boot2), ValidationError);

    // Guard rails.
    CounterRng rng3 = CounterRng::derive(53, Stream::kEval);
    CHECK_THROWS_WITH_AS(bias_variance_probe(theta, {0.0, 0.4}, 100, ds, rng3, cfg),
                         doctest::Contains("must contain 1.0"), ValidationError);
    CHECK_THROWS_WITH_AS(bias_variance_probe(theta, grid, 99, ds, rng3, cfg),
                         doctest::Contains("at least 100 batches"), ValidationError);
}

TEST_CASE("export_grid writes a tiled P5 sheet that read_pgm round-trips") {
    const std::string path = "/tmp/dpsinkhorn_test_grid.pgm";

    SUBCASE("four 2x2 images tile into a 5x5 sheet with black separators") {
        // Image i is constant: 1.0, 0.0, -1.0, 1.0 → bytes 255, 127, 0, 255.
        Matrix images(4, 4);
        const double vals[4] = {1.0, 0.0, -1.0, 1.0};
        for (size_t i = 0; i < 4; ++i)
            for (size_t j = 0; j < 4; ++j) images(i, j) = vals[i];
        export_grid(images, 2, path);

        PgmImage img = read_pgm(path);
        REQUIRE(img.width == 5);
        REQUIRE(img.height == 5);
        REQUIRE(img.pixels.size() == 25);

        auto px = [&](size_t r, size_t c) { return img.pixels[r * img.width + c]; };
        // Tile (0,0) = image 0.
        CHECK(px(0, 0) == 255);
        CHECK(px(1, 1) == 255);
        // Vertical separator column.
        CHECK(px(0, 2) == 0);
        CHECK(px(4, 2) == 0);
        // Tile (0,1) = image 1 (127 everywhere).
        CHECK(px(0, 3) == 127);
        CHECK(px(1, 4) == 127);
        // Horizontal separator row.
        CHECK(px(2, 0) == 0);
        CHECK(px(2, 4) == 0);
        // Tile (1,0) = image 2 (0), tile (1,1) = image 3 (255).
        CHECK(px(3, 0) == 0);
        CHECK(px(4, 1) == 0);
        CHECK(px(3, 3) == 255);
        CHECK(px(4, 4) == 255);
    }
    SUBCASE("a three-image sheet leaves the unused tile black") {
        Matrix images(3, 4, 1.0);  // all-white 2x2 images
        export_grid(images, 2, path);
        PgmImage img = read_pgm(path);
        REQUIRE(img.width == 5);
        REQUIRE(img.height == 5);
        auto px = [&](size_t r, size_t c) { return img.pixels[r * img.width + c]; };
        CHECK(px(0, 0) == 255);
        CHECK(px(3, 0) == 255);  // third image, tile (1,0)
        CHECK(px(3, 3) == 0);    // empty fourth tile
        CHECK(px(4, 4) == 0);
    }
    SUBCASE("validation") {
        Matrix bad(2, 5);
        CHECK_THROWS_AS(export_grid(bad, 2, path), ValidationError);
        CHECK_THROWS_AS(export_grid(Matrix(0, 4), 2, path), ValidationError);
        CHECK_THROWS_AS(read_pgm("/tmp/definitely_absent.pgm"), IoError);
    }
    std::remove(path.c_str());
}
