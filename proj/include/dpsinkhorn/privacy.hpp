#pragma once

#include <cstddef>
#include <vector>

#include "dpsinkhorn/kernels.hpp"
#include "dpsinkhorn/matrix.hpp"
#include "dpsinkhorn/rng.hpp"

namespace dpsinkhorn {

// Gradient sanitization (per-row clip + Gaussian noise) and Rényi-DP
// accounting with Poisson subsampling and composition.

// The sanitizer supports two noise conventions that differ by a factor of 2
// in the std relative to the clip bound; neither is asserted correct. The
// accountant's noise multiplier is derived consistently from the convention:
//   ALG1: std = 2Δσ, sensitivity 2Δ  → z = σ
//   TEXT: std = Δσ,  sensitivity 2Δ  → z = σ/2
enum class NoiseConvention {
    kAlg1,  // default
    kText,
};

struct SanitizerConfig {
    double clip_bound = 0.5;   // Δ > 0
    double noise_scale = 1.5;  // σ > 0
    NoiseConvention noise_convention = NoiseConvention::kAlg1;
};

// Gaussian noise standard deviation implied by the convention.
double noise_std(const SanitizerConfig& cfg);
// Noise multiplier z = std / sensitivity handed to the accountant.
double noise_multiplier(const SanitizerConfig& cfg);

// Projects g onto the Δ-ball: g·min(Δ/||g||₂, 1). Zero maps to zero.
Vector clip_row(const Vector& g, double delta);

// Sanitizes a per-sample gradient matrix: every row clipped to Δ; rows
// 0..n−1 (the cross group) additionally get i.i.d. Gaussian noise of the
// convention's std per coordinate. Rows n.. are deterministic given G.
// Consumes exactly 2·n·d counter positions of rng, addressed per entry, so
// partitioning cannot change the noise (bitwise identical serial/parallel).
Matrix sanitize(const Matrix& G, const SanitizerConfig& cfg, size_t n, CounterRng& rng,
                Exec mode = Exec::kParallel);

// An RDP curve: ε(α) sampled on a grid of orders.
struct RdpCurve {
    std::vector<double> orders;    // α values, all > 1
    std::vector<double> epsilons;  // matching ε(α) ≥ 0
};

// Default order grid: integers 2..64 plus {128, 256}.
std::vector<double> default_orders();

enum class CompositionPolicy {
    kPerRowNFold,  // n-fold composition of per-row releases (default)
    kSingleQuery,  // whole batch as one release (sensitivity analysis)
};

struct AccountingPolicy {
    double q = 0.0;        // Poisson sampling ratio ∈ [0,1]
    size_t steps = 0;      // composition horizon T
    CompositionPolicy per_step_composition = CompositionPolicy::kPerRowNFold;
    size_t batch_rows = 0; // n of the n-fold composition
};

// Gaussian mechanism: (α, α·S²/(2·std²))-RDP.
double rdp_gaussian(double alpha, double sensitivity, double std);

// Per-step RDP of releasing the sanitized batch gradient without
// subsampling: 2αn/σ² under TEXT, αn/(2σ²) under ALG1 (n-fold composition of
// the per-row Gaussian release under the respective convention).
double rdp_per_step(double alpha, size_t n, double sigma,
                    NoiseConvention convention = NoiseConvention::kText);

// Poisson-subsampled Gaussian mechanism at integer order α ≥ 2:
//   ε(α) = 1/(α−1) · log( Σ_{k=0}^{α} C(α,k)·(1−q)^{α−k}·q^k·e^{k(k−1)/(2z²)} )
// evaluated with log-sum-exp over the k terms and log-gamma binomials.
// q=0 gives 0; q=1 reduces to α/(2z²).
double rdp_sampled_gaussian(double q, double z, int alpha);

// Per-step curve over a grid of integer orders under a policy (subsampled
// per-row release composed n-fold, or a single subsampled query).
RdpCurve per_step_curve(double q, double z, const AccountingPolicy& policy,
                        const std::vector<double>& orders = default_orders());

// RDP linear composition: every ε multiplied by steps.
RdpCurve compose(const RdpCurve& curve, size_t steps);

// Entrywise sum of two curves on the same grid.
RdpCurve add_curves(const RdpCurve& a, const RdpCurve& b);

// Conversion to (ε, δ)-DP: min over orders of ε(α) + log(1/δ)/(α−1), plus
// the minimizing order.
struct DpPoint {
    double epsilon;
    double best_order;
};
DpPoint to_dp(const RdpCurve& curve, double delta);

// Largest T such that T steps stay within target_epsilon at delta; 0 when a
// single step already exceeds the target. Monotone in target_epsilon.
// policy.steps is ignored (it is the quantity being solved for).
size_t calibrate_steps(double q, double z, double delta, double target_epsilon,
                       const AccountingPolicy& policy,
                       const std::vector<double>& orders = default_orders());

}  // namespace dpsinkhorn
