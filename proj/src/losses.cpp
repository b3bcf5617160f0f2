#include "dpsinkhorn/losses.hpp"

#include <cmath>
#include <string>

#include "dpsinkhorn/errors.hpp"

namespace dpsinkhorn {

size_t debias_group_size(size_t n, double p) {
    if (p < 0.0 || p > 1.0) throw ValidationError("debias_group_size: p must be in [0,1]");
    return static_cast<size_t>(std::floor(static_cast<double>(n) * p));
}

Matrix conditional_augment(const Matrix& samples, const std::vector<uint32_t>& labels,
                           double alpha_c, size_t L) {
    if (labels.size() != samples.rows())
        throw ValidationError("conditional_augment: label count does not match row count");
    if (alpha_c < 0.0) throw ValidationError("conditional_augment: alpha_c must be >= 0");
    const size_t d = samples.cols();
    Matrix out(samples.rows(), d + L);
    for (size_t k = 0; k < samples.rows(); ++k) {
        if (labels[k] >= L)
            throw ValidationError("conditional_augment: label " + std::to_string(labels[k]) +
                                  " out of range for L=" + std::to_string(L));
        const double* src = samples.row(k);
        double* dst = out.row(k);
        for (size_t j = 0; j < d; ++j) dst[j] = src[j];
        dst[d + labels[k]] = alpha_c;
    }
    return out;
}

namespace {

// Copies rows [begin, end) of src.
Matrix slice_rows(const Matrix& src, size_t begin, size_t end) {
    Matrix out(end - begin, src.cols());
    for (size_t i = begin; i < end; ++i)
        for (size_t j = 0; j < src.cols(); ++j) out(i - begin, j) = src(i, j);
    return out;
}

std::vector<uint32_t> slice_labels(const std::vector<uint32_t>& l, size_t begin, size_t end) {
    return std::vector<uint32_t>(l.begin() + begin, l.begin() + end);
}

// Adds the first d columns of rows of add into dst rows [offset, offset+rows).
void accumulate_block(Matrix& dst, const Matrix& add, size_t offset, size_t d) {
    for (size_t i = 0; i < add.rows(); ++i)
        for (size_t j = 0; j < d; ++j) dst(offset + i, j) += add(i, j);
}

}  // namespace

std::optional<LossOutput> semi_debiased_loss(const SplitBatch& batch, const Matrix& Y,
                                             const std::vector<uint32_t>& y_labels,
                                             double lambda, double m_mix, double alpha_c,
                                             size_t L, const SolverConfig& solver) {
    const size_t n = batch.n;
    const size_t np = batch.n_prime;
    if (n < 1) throw ValidationError("semi_debiased_loss: cross group must be nonempty");
    if (batch.samples.rows() != n + np)
        throw ValidationError("semi_debiased_loss: sample rows do not equal n + n_prime");
    if (batch.labels.size() != n + np)
        throw ValidationError("semi_debiased_loss: label count does not equal n + n_prime");
    if (Y.rows() == 0) return std::nullopt;  // empty real batch: skip-step signal
    if (y_labels.size() != Y.rows())
        throw ValidationError("semi_debiased_loss: real labels do not match real rows");

    const size_t d = batch.samples.cols();

    // Augmented views. A = cross rows [0:n]; B = self-term partner rows
    // [n':n+n'] (always n rows; overlaps A by n−n' rows when p<1).
    Matrix A = conditional_augment(slice_rows(batch.samples, 0, n), slice_labels(batch.labels, 0, n), alpha_c, L);
    Matrix B = conditional_augment(slice_rows(batch.samples, np, n + np), slice_labels(batch.labels, np, n + np), alpha_c, L);
    Matrix Ya = conditional_augment(Y, y_labels, alpha_c, L);

    const Vector wa = uniform_weights(n);
    const Vector wy = uniform_weights(Y.rows());

    // Cross term Ŵ(A, Y), coefficient +2.
    CostMatrix C_cross = cost_matrix(A, Ya, m_mix, solver.mode);
    DualPotentials pot_cross = sinkhorn_potentials(C_cross, wa, wy, lambda, solver.max_iters, solver.tol, solver.mode);
    TransportPlan P_cross = transport_plan(pot_cross, C_cross, wa, wy, solver.mode);
    const double cross_value = plan_cost(P_cross, C_cross);

    // Self term Ŵ(A, B), coefficient −1. Gradients flow to both sides: the
    // row side lands on cross rows [0:n], the column side on rows [n':n+n'].
    CostMatrix C_self = cost_matrix(A, B, m_mix, solver.mode);
    DualPotentials pot_self = sinkhorn_potentials(C_self, wa, wa, lambda, solver.max_iters, solver.tol, solver.mode);
    TransportPlan P_self = transport_plan(pot_self, C_self, wa, wa, solver.mode);
    const double self_value = plan_cost(P_self, C_self);

    // Per-sample gradient over all n+n' batch rows, then split into the two
    // output blocks. Only the first d (sample) coordinates are kept; the
    // one-hot block's coordinates are discarded.
    Matrix G(n + np, d);
    accumulate_block(G, sample_gradient(A, Ya, P_cross, m_mix, 2.0, solver.mode), 0, d);
    accumulate_block(G, sample_gradient(A, B, P_self, m_mix, -1.0, solver.mode), 0, d);
    accumulate_block(G, sample_gradient_cols(A, B, P_self, m_mix, -1.0, solver.mode), np, d);

    LossOutput out;
    out.value = 2.0 * cross_value - self_value;
    out.grad_cross = slice_rows(G, 0, n);
    out.grad_debias = slice_rows(G, n, n + np);
    out.cross_iterations = pot_cross.iterations;
    out.self_iterations = pot_self.iterations;
    out.cross_residual = pot_cross.residual;
    out.self_residual = pot_self.residual;
    return out;
}

}  // namespace dpsinkhorn
