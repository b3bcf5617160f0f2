#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dpsinkhorn/matrix.hpp"
#include "dpsinkhorn/ot.hpp"

namespace dpsinkhorn {

// Semi-debiased Sinkhorn training loss over split generated batches, with
// class-conditional cost augmentation.

// A generated batch split into the cross group (rows 0..n−1, compared against
// real data) and the debias group (rows n..n+n'−1, self-term only). The
// self term pairs rows [0:n] against rows [n':n+n'], so at p<1 the two views
// share n−n' rows.
struct SplitBatch {
    Matrix samples;               // (n+n')×d
    size_t n;                     // cross-group size, ≥ 1
    size_t n_prime;               // debias-group size, floor(n·p)
    std::vector<uint32_t> labels; // n+n' class ids in {0..L−1}
};

// Computes n' = floor(n·p).
size_t debias_group_size(size_t n, double p);

// Loss value and sample gradients. grad_debias carries only the self-term
// contribution; the cross term contributes exactly zero to debias rows.
struct LossOutput {
    double value = 0.0;
    Matrix grad_cross;    // n×d
    Matrix grad_debias;   // n'×d
    // Solver diagnostics of the two Ŵ terms (cross, self).
    size_t cross_iterations = 0;
    size_t self_iterations = 0;
    double cross_residual = 0.0;
    double self_residual = 0.0;
};

// Appends an α_c-scaled one-hot class block to every row:
// row k of the result is [samples row k, α_c·onehot(labels[k])] of width d+L.
// Throws ValidationError when a label is out of range.
Matrix conditional_augment(const Matrix& samples, const std::vector<uint32_t>& labels,
                           double alpha_c, size_t L);

// Solver knobs for the two entropic OT solves inside a loss evaluation.
struct SolverConfig {
    size_t max_iters = 500;
    double tol = 1e-6;
    Exec mode = Exec::kParallel;
};

// Semi-debiased Sinkhorn loss
//   Ŝ = 2·Ŵ_λ(X[0:n], Y) − Ŵ_λ(X[0:n], X[n':n+n'])
// over conditionally augmented samples, with fixed-plan gradients taken on
// the sample coordinates only (the one-hot block's gradient coordinates are
// discarded: generated labels are sampled, not learned). The Ŵ(Y,Y') term of
// the fully debiased loss never contributes generator gradients and is not
// computed.
//
// Returns std::nullopt when Y is empty (Poisson sampling can produce empty
// real batches; the caller treats it as a skip-step signal).
std::optional<LossOutput> semi_debiased_loss(const SplitBatch& batch, const Matrix& Y,
                                             const std::vector<uint32_t>& y_labels,
                                             double lambda, double m_mix, double alpha_c,
                                             size_t L, const SolverConfig& solver = {});

}  // namespace dpsinkhorn
