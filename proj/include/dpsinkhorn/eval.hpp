#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsinkhorn/data.hpp"
#include "dpsinkhorn/losses.hpp"
#include "dpsinkhorn/nn.hpp"
#include "dpsinkhorn/rng.hpp"

namespace dpsinkhorn {

// Synthetic-data utility and quality measures, plus the bias-variance probe
// over the debiasing fraction p.

// Draws `count` samples from the generator with uniform labels; the latent
// dim is inferred from the architecture (input_dim − L).
Dataset synthesize(const GeneratorParams& theta, size_t L, size_t count, LatentKind kind,
                   CounterRng& rng);

// Trains the nn-module classifier on the synthetic set and reports accuracy
// on the real test set, averaged over `reps` training repetitions (the seed
// varies per repetition). Degenerate synthetic sets (fewer than two classes)
// raise ValidationError.
double downstream_utility(const Dataset& synthetic, const Dataset& real_test,
                          ClassifierKind kind, const ClassifierBudget& budget = {},
                          size_t reps = 5);

// Full synthesis+train protocol: per repetition, synthesizes a fresh set of
// `count` samples and trains a fresh classifier; returns the mean accuracy
// over `reps` repetitions.
double utility_with_generator(const GeneratorParams& theta, size_t L, LatentKind latent,
                              size_t count, const Dataset& real_test, ClassifierKind kind,
                              const ClassifierBudget& budget, CounterRng& rng, size_t reps = 5);

struct DivergenceResult {
    double mean = 0.0;
    double std = 0.0;              // std over the subsample draws
    std::vector<double> values;    // per-draw values
};

// Empirical Sinkhorn divergence 2Ŵ(X,Y') − Ŵ(X,X') − Ŵ(Y,Y') over equal-size
// subsamples with fresh splits, averaged over `draws` draws. Per-draw splits
// are keyed by (seed, draw index, set size) only, so equal-size inputs get
// identical splits and literally matching sets cancel to exactly 0.
DivergenceResult divergence_metric(const Matrix& X, const Matrix& Y, double lambda,
                                   double m_mix, CounterRng rng, size_t draws = 10,
                                   const SolverConfig& solver = {});

// --- bias-variance probe -----------------------------------------------------

struct ProbeConfig {
    size_t n = 50;             // cross-group size per batch
    double lambda = 1.0;       // probe entropic weight (see note below)
    double m_mix = 1.0;
    double alpha_c = 15.0;
    LatentKind latent = LatentKind::kUniform01;
    SolverConfig solver{500, 1e-6, Exec::kParallel};
    bool keep_samples = true;  // retain raw per-batch gradients for bootstraps
};

struct ProbeRow {
    double p;
    double bias;           // ‖mean gradient − mean gradient at p=1‖₂
    double norm_variance;  // trace of per-coordinate variance / p=0 value
};

struct ProbeResult {
    std::vector<ProbeRow> rows;
    // Raw per-batch flattened parameter gradients, one matrix (batches ×
    // param_count) per p-grid entry; empty when keep_samples is false.
    std::vector<Matrix> samples;
};

// Parameter-gradient bias/variance of the semi-debiased loss across the
// p grid: for each p, gradients G_p = ∇_θ Ŝ over `batches` (real, generated)
// batch pairs. All p values see the *same* per-batch randomness (latents,
// labels and the real subsample are drawn once per batch at the maximal size
// and sliced), so p-to-p comparisons are paired; significance claims use the
// joint bootstrap below. p_grid must contain 1.0 (the ground-truth arm).
ProbeResult bias_variance_probe(const GeneratorParams& theta, const std::vector<double>& p_grid,
                                size_t batches, const Dataset& dataset, CounterRng rng,
                                const ProbeConfig& cfg = {});

// Joint bootstrap (shared batch indices across arms) of the difference in
// bias and in normalized variance between two p-grid entries. Positive
// bias_diff means arm a has larger bias; positive var_diff means arm b has
// larger variance.
struct PairStats {
    double bias_a, bias_b;
    double bias_diff;      // bias_a − bias_b
    double bias_diff_sd;   // bootstrap sd of the difference
    double var_a, var_b;   // normalized variances
    double var_diff;       // var_b − var_a
    double var_diff_sd;
};
PairStats probe_bootstrap(const ProbeResult& result, const std::vector<double>& p_grid,
                          size_t idx_a, size_t idx_b, size_t replicates, CounterRng rng);

// Writes a binary PGM (P5) tile sheet of k side×side images: ceil(√k) tiles
// per row, 1-pixel black separators, so a g×r tile grid measures
// (g·side + g − 1) × (r·side + r − 1) pixels. Pixels are denormalized from
// [−1,1] with round-half-down (0 ↦ 127).
void export_grid(const Matrix& images, size_t side, const std::string& path);

// Minimal P5 reader for round-trip checks.
struct PgmImage {
    size_t width = 0, height = 0;
    std::vector<uint8_t> pixels;
};
PgmImage read_pgm(const std::string& path);

}  // namespace dpsinkhorn
