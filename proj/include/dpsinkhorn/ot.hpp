#pragma once

#include <cstddef>

#include "dpsinkhorn/kernels.hpp"
#include "dpsinkhorn/matrix.hpp"

namespace dpsinkhorn {

// Entropic optimal transport between finite sample batches: mixed L2²+L1
// ground costs, log-domain Sinkhorn iterations, primal plan recovery, and
// fixed-plan (envelope) sample gradients.

// Ground-cost matrix between two batches plus the L1 mixing weight it was
// built with. Entry (i,j) = ||x_i − y_j||₂² + m·Σ_k |x_ik − y_jk|.
struct CostMatrix {
    Matrix values;      // n×m, all entries ≥ 0
    double mix_weight;  // the m of the mixed cost
};

// Dual potentials of the entropic problem at exit, with convergence
// bookkeeping. residual is the max marginal violation of the induced plan at
// exit; converged means residual ≤ the tolerance that was requested.
struct DualPotentials {
    Vector f;            // size n
    Vector g;            // size m
    double lambda;       // entropic regularization weight
    size_t iterations;   // f-updates performed
    double residual;     // max marginal violation at exit
    bool converged;
};

// Primal transport plan with the target marginals it couples.
struct TransportPlan {
    Matrix weights;        // n×m, nonnegative
    Vector row_marginal;   // target a (size n)
    Vector col_marginal;   // target b (size m)
};

// Mixed ground cost c_m(x,y) = ||x−y||₂² + m·Σ|x_k−y_k|. Symmetric, zero iff
// x = y (for m ≥ 0). Throws ValidationError on dimension mismatch.
double elementwise_cost(const Vector& x, const Vector& y, double m);

// Pairwise cost matrix; entry (i,j) = elementwise_cost(X row i, Y row j, m).
// Empty inputs produce an empty matrix. Rows are computed independently
// (data-parallel under Exec::kParallel, bitwise equal to kSerial).
CostMatrix cost_matrix(const Matrix& X, const Matrix& Y, double m,
                       Exec mode = Exec::kParallel);

// Uniform probability vector (1/n, ..., 1/n).
Vector uniform_weights(size_t n);

// Log-domain Sinkhorn: alternately
//   f_i ← −λ log Σ_k exp(log b_k + g_k/λ − C_ik/λ)
//   g_k ← −λ log Σ_i exp(log a_i + f_i/λ − C_ik/λ)
// until the induced plan's max marginal violation ≤ tol or max_iters
// f-updates have run. The row violation of the current iterate is read off
// the f-update itself (row sum i of plan(f,g) equals a_i·exp((f_i−f_new_i)/λ)),
// so convergence checks cost no extra pass. All exponentials live inside
// log-sum-exp; costs up to 1e4 at λ=0.05 stay finite.
//
// a and b must be probability vectors; λ > 0. NaN appearing mid-iteration
// raises NumericalError naming the iteration.
DualPotentials sinkhorn_potentials(const CostMatrix& C, const Vector& a, const Vector& b,
                                   double lambda, size_t max_iters = 500, double tol = 1e-6,
                                   Exec mode = Exec::kParallel);

// Primal plan from converged potentials: P_ij = exp((f_i+g_j−C_ij)/λ)·a_i·b_j.
TransportPlan transport_plan(const DualPotentials& pot, const CostMatrix& C, const Vector& a,
                             const Vector& b, Exec mode = Exec::kParallel);

// Loss value Σ_ij C_ij·P_ij (Frobenius inner product). This is the training
// loss value; see dual_value for the dual objective, which differs by the
// entropy term.
double plan_cost(const TransportPlan& P, const CostMatrix& C);

// Dual objective ⟨a,f⟩ + ⟨b,g⟩, exposed for diagnostics.
double dual_value(const DualPotentials& pot, const Vector& a, const Vector& b);

// Gradient of plan_cost with respect to X, holding the plan fixed (envelope
// rule): row i = scale·Σ_j P_ij·(2(x_i−y_j) + m·sign(x_i−y_j)), sign(0)=0.
Matrix sample_gradient(const Matrix& X, const Matrix& Y, const TransportPlan& P, double m,
                       double scale, Exec mode = Exec::kParallel);

// Column-side twin: gradient of plan_cost with respect to Y, plan fixed:
// row j = scale·Σ_i P_ij·(2(y_j−x_i) + m·sign(y_j−x_i)). Equals
// sample_gradient(Y, X, Pᵀ, m, scale).
Matrix sample_gradient_cols(const Matrix& X, const Matrix& Y, const TransportPlan& P, double m,
                            double scale, Exec mode = Exec::kParallel);

// Plan marginal diagnostics: max_i |Σ_j P_ij − a_i| and max_j |Σ_i P_ij − b_j|.
double max_marginal_violation(const TransportPlan& P);

}  // namespace dpsinkhorn
