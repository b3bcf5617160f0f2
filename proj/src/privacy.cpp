#include "dpsinkhorn/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpsinkhorn/errors.hpp"

namespace dpsinkhorn {

double noise_std(const SanitizerConfig& cfg) {
    const double base = cfg.clip_bound * cfg.noise_scale;
    return cfg.noise_convention == NoiseConvention::kAlg1 ? 2.0 * base : base;
}

double noise_multiplier(const SanitizerConfig& cfg) {
    // Sensitivity of the clipped per-row release is 2Δ in both conventions.
    return noise_std(cfg) / (2.0 * cfg.clip_bound);
}

Vector clip_row(const Vector& g, double delta) {
    if (!(delta > 0.0)) throw ValidationError("clip_row: delta must be > 0");
    double norm_sq = 0.0;
    for (double v : g) norm_sq += v * v;
    const double norm = std::sqrt(norm_sq);
    if (norm <= delta) return g;
    Vector out(g.size());
    const double scale = delta / norm;
    for (size_t k = 0; k < g.size(); ++k) out[k] = g[k] * scale;
    return out;
}

Matrix sanitize(const Matrix& G, const SanitizerConfig& cfg, size_t n, CounterRng& rng,
                Exec mode) {
    if (n > G.rows()) throw ValidationError("sanitize: n exceeds row count");
    if (!(cfg.clip_bound > 0.0)) throw ValidationError("sanitize: clip bound must be > 0");
    if (!(cfg.noise_scale >= 0.0)) throw ValidationError("sanitize: noise scale must be >= 0");
    const size_t d = G.cols();
    const double std = noise_std(cfg);
    const uint64_t base = rng.counter();
    Matrix out(G.rows(), d);
    for_each_index(G.rows(), mode, [&](size_t i) {
        // Clip (all rows).
        double norm_sq = 0.0;
        const double* gi = G.row(i);
        for (size_t k = 0; k < d; ++k) norm_sq += gi[k] * gi[k];
        const double norm = std::sqrt(norm_sq);
        const double scale = norm > cfg.clip_bound ? cfg.clip_bound / norm : 1.0;
        double* oi = out.row(i);
        for (size_t k = 0; k < d; ++k) oi[k] = gi[k] * scale;
        // Noise (cross rows only). Entry (i,k) reads counter positions
        // base + 2(i·d+k), +1 — a pure function of the entry index.
        if (i < n && std > 0.0) {
            for (size_t k = 0; k < d; ++k) {
                oi[k] += std * rng.gaussian_at(base + 2 * (i * d + k));
            }
        }
    });
    rng.set_counter(base + 2 * static_cast<uint64_t>(n) * d);
    return out;
}

double rdp_gaussian(double alpha, double sensitivity, double std) {
    if (!(std > 0.0)) throw ValidationError("rdp_gaussian: std must be > 0");
    if (!(alpha > 1.0)) throw ValidationError("rdp_gaussian: alpha must be > 1");
    return alpha * sensitivity * sensitivity / (2.0 * std * std);
}

double rdp_per_step(double alpha, size_t n, double sigma, NoiseConvention convention) {
    if (!(sigma > 0.0)) throw ValidationError("rdp_per_step: sigma must be > 0");
    if (n == 0) return 0.0;
    const double nn = static_cast<double>(n);
    if (convention == NoiseConvention::kText) {
        return 2.0 * alpha * nn / (sigma * sigma);
    }
    return alpha * nn / (2.0 * sigma * sigma);
}

namespace {

// log C(n,k) via lgamma.
double log_binom(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

double rdp_sampled_gaussian(double q, double z, int alpha) {
    if (alpha < 2) throw ValidationError("rdp_sampled_gaussian: alpha must be an integer >= 2");
    if (q < 0.0 || q > 1.0) throw ValidationError("rdp_sampled_gaussian: q must be in [0,1]");
    if (!(z > 0.0)) throw ValidationError("rdp_sampled_gaussian: z must be > 0");
    if (q == 0.0) return 0.0;
    // log of Σ_k C(α,k)(1−q)^{α−k} q^k e^{k(k−1)/(2z²)}, max-shifted.
    const double logq = std::log(q);
    const double log1mq = q < 1.0 ? std::log1p(-q) : -std::numeric_limits<double>::infinity();
    std::vector<double> terms(alpha + 1);
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= alpha; ++k) {
        // Assembled piecewise so the q=1 endpoint stays clean: the k<α terms
        // carry (α−k)·log(0) = −inf and must not meet a 0·(−inf) NaN at k=α.
        double t = log_binom(alpha, k) + static_cast<double>(k) * (k - 1) / (2.0 * z * z);
        if (k > 0) t += k * logq;
        if (alpha - k > 0) t += (alpha - k) * log1mq;
        terms[k] = t;
        mx = std::max(mx, t);
    }
    double s = 0.0;
    for (int k = 0; k <= alpha; ++k) s += std::exp(terms[k] - mx);
    const double log_sum = mx + std::log(s);
    return std::max(0.0, log_sum / (alpha - 1.0));
}

std::vector<double> default_orders() {
    std::vector<double> orders;
    for (int a = 2; a <= 64; ++a) orders.push_back(a);
    orders.push_back(128.0);
    orders.push_back(256.0);
    return orders;
}

RdpCurve per_step_curve(double q, double z, const AccountingPolicy& policy,
                        const std::vector<double>& orders) {
    RdpCurve curve;
    curve.orders = orders;
    curve.epsilons.resize(orders.size());
    const double fold = policy.per_step_composition == CompositionPolicy::kPerRowNFold
                            ? static_cast<double>(policy.batch_rows)
                            : 1.0;
    for (size_t i = 0; i < orders.size(); ++i) {
        const int alpha = static_cast<int>(orders[i]);
        if (static_cast<double>(alpha) != orders[i] || alpha < 2)
            throw ValidationError("per_step_curve: orders must be integers >= 2");
        curve.epsilons[i] = fold * rdp_sampled_gaussian(q, z, alpha);
    }
    return curve;
}

RdpCurve compose(const RdpCurve& curve, size_t steps) {
    RdpCurve out = curve;
    for (double& e : out.epsilons) e *= static_cast<double>(steps);
    return out;
}

RdpCurve add_curves(const RdpCurve& a, const RdpCurve& b) {
    if (a.orders != b.orders) throw ValidationError("add_curves: order grids differ");
    RdpCurve out = a;
    for (size_t i = 0; i < out.epsilons.size(); ++i) out.epsilons[i] += b.epsilons[i];
    return out;
}

DpPoint to_dp(const RdpCurve& curve, double delta) {
    if (curve.orders.empty()) throw ValidationError("to_dp: empty curve");
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("to_dp: delta must be in (0,1)");
    const double log_inv_delta = std::log(1.0 / delta);
    DpPoint best{std::numeric_limits<double>::infinity(), 0.0};
    for (size_t i = 0; i < curve.orders.size(); ++i) {
        const double alpha = curve.orders[i];
        if (!(alpha > 1.0)) throw ValidationError("to_dp: orders must be > 1");
        const double eps = curve.epsilons[i] + log_inv_delta / (alpha - 1.0);
        if (eps < best.epsilon) {
            best.epsilon = eps;
            best.best_order = alpha;
        }
    }
    return best;
}

size_t calibrate_steps(double q, double z, double delta, double target_epsilon,
                       const AccountingPolicy& policy, const std::vector<double>& orders) {
    if (!(target_epsilon > 0.0)) throw ValidationError("calibrate_steps: target epsilon must be > 0");
    const RdpCurve step = per_step_curve(q, z, policy, orders);
    auto eps_at = [&](size_t T) { return to_dp(compose(step, T), delta).epsilon; };
    if (eps_at(1) > target_epsilon) return 0;
    // Exponential bracket then binary search on the monotone ε(T).
    size_t lo = 1, hi = 2;
    const size_t kCap = size_t(1) << 62;
    while (eps_at(hi) <= target_epsilon) {
        lo = hi;
        if (hi >= kCap) return hi;  // target unreachable in practice; clamp
        hi *= 2;
    }
    while (hi - lo > 1) {
        const size_t mid = lo + (hi - lo) / 2;
        if (eps_at(mid) <= target_epsilon) lo = mid;
        else hi = mid;
    }
    return lo;
}

}  // namespace dpsinkhorn
