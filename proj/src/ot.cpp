#include "dpsinkhorn/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpsinkhorn/errors.hpp"

namespace dpsinkhorn {

namespace {

// Log-sum-exp over a strided sequence: values[k*stride] for k in [0,count).
// Max-shifted for stability; returns -inf for all -inf inputs.
double logsumexp_strided(const double* values, size_t count, size_t stride) {
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < count; ++k) mx = std::max(mx, values[k * stride]);
    if (!std::isfinite(mx)) return mx;  // all terms -inf (or a NaN, surfaced later)
    double s = 0.0;
    for (size_t k = 0; k < count; ++k) s += std::exp(values[k * stride] - mx);
    return mx + std::log(s);
}

void check_probability_vector(const Vector& w, const char* name) {
    double sum = 0.0;
    for (double v : w) {
        if (!(v >= 0.0)) throw ValidationError(std::string("sinkhorn_potentials: ") + name + " has negative or NaN entries");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError(std::string("sinkhorn_potentials: ") + name + " does not sum to 1 (sum=" + std::to_string(sum) + ")");
}

}  // namespace

double elementwise_cost(const Vector& x, const Vector& y, double m) {
    if (x.size() != y.size())
        throw ValidationError("elementwise_cost: dimension mismatch (" + std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    double l2sq = 0.0, l1 = 0.0;
    for (size_t k = 0; k < x.size(); ++k) {
        double d = x[k] - y[k];
        l2sq += d * d;
        l1 += std::abs(d);
    }
    return l2sq + m * l1;
}

CostMatrix cost_matrix(const Matrix& X, const Matrix& Y, double m, Exec mode) {
    if (!X.empty() && !Y.empty() && X.cols() != Y.cols())
        throw ValidationError("cost_matrix: dimension mismatch (" + std::to_string(X.cols()) + " vs " + std::to_string(Y.cols()) + ")");
    CostMatrix out;
    out.mix_weight = m;
    out.values = Matrix(X.rows(), Y.rows());
    const size_t d = X.cols();
    for_each_index(X.rows(), mode, [&](size_t i) {
        const double* xi = X.row(i);
        for (size_t j = 0; j < Y.rows(); ++j) {
            const double* yj = Y.row(j);
            double l2sq = 0.0, l1 = 0.0;
            for (size_t k = 0; k < d; ++k) {
                double diff = xi[k] - yj[k];
                l2sq += diff * diff;
                l1 += std::abs(diff);
            }
            out.values(i, j) = l2sq + m * l1;
        }
    });
    return out;
}

Vector uniform_weights(size_t n) {
    return Vector(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
}

DualPotentials sinkhorn_potentials(const CostMatrix& C, const Vector& a, const Vector& b,
                                   double lambda, size_t max_iters, double tol, Exec mode) {
    const size_t n = C.values.rows();
    const size_t m = C.values.cols();
    if (a.size() != n || b.size() != m)
        throw ValidationError("sinkhorn_potentials: weight sizes do not match the cost matrix");
    if (n == 0 || m == 0)
        throw ValidationError("sinkhorn_potentials: empty cost matrix");
    if (!(lambda > 0.0)) throw ValidationError("sinkhorn_potentials: lambda must be > 0");
    check_probability_vector(a, "a");
    check_probability_vector(b, "b");

    // Work in the scaled domain: K = −C/λ; potentials kept as φ = f/λ, ψ = g/λ
    // so the updates are pure log-sum-exp over K + log-weights.
    Matrix K(n, m);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < m; ++j) K(i, j) = -C.values(i, j) / lambda;
    Vector loga(n), logb(m);
    for (size_t i = 0; i < n; ++i) loga[i] = std::log(a[i]);
    for (size_t j = 0; j < m; ++j) logb[j] = std::log(b[j]);

    Vector phi(n, 0.0), psi(m, 0.0), phi_new(n, 0.0);
    Matrix row_buf(n, m);  // ψ_j + log b_j + K_ij, assembled per row update
    double residual = std::numeric_limits<double>::infinity();
    size_t applied = 0;  // f-updates actually applied
    bool converged = false;

    for (size_t it = 1;; ++it) {
        // Row update φ_i ← −LSE_j(log b_j + ψ_j + K_ij). The row sum of the
        // plan induced by the *current* (φ,ψ) is a_i·exp(φ_i − φ_new_i), so
        // the marginal violation falls out of the update for free.
        for_each_index(n, mode, [&](size_t i) {
            double* r = row_buf.row(i);
            const double* Ki = K.row(i);
            for (size_t j = 0; j < m; ++j) r[j] = logb[j] + psi[j] + Ki[j];
            phi_new[i] = -logsumexp_strided(r, m, 1);
        });
        double row_res = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double v = a[i] * std::abs(std::exp(phi[i] - phi_new[i]) - 1.0);
            // NaN-safe accumulation: std::max would silently drop a NaN in
            // the second argument.
            if (!(v <= row_res)) row_res = v;
        }
        if (std::isnan(row_res))
            throw NumericalError("sinkhorn_potentials: NaN at iteration " + std::to_string(it));
        // After the first g-update the column marginals of (φ,ψ) are exact,
        // so from iteration 2 on row_res alone is the max violation of the
        // *current* iterate. Both exits return (φ,ψ) before the swap so the
        // reported residual measures exactly the potentials handed back.
        if (it > 1 && row_res <= tol) {
            residual = row_res;
            converged = true;
            break;
        }
        if (it > max_iters) {
            residual = row_res;
            break;
        }
        phi.swap(phi_new);
        ++applied;

        // Column update ψ_j ← −LSE_i(log a_i + φ_i + K_ij); columns of the
        // induced plan are exact afterwards.
        for_each_index(m, mode, [&](size_t j) {
            // Strided pass down column j; desk-scale n keeps this cache-tame.
            double mx = -std::numeric_limits<double>::infinity();
            for (size_t i = 0; i < n; ++i) mx = std::max(mx, loga[i] + phi[i] + K(i, j));
            double s = 0.0;
            if (std::isfinite(mx)) {
                for (size_t i = 0; i < n; ++i) s += std::exp(loga[i] + phi[i] + K(i, j) - mx);
                psi[j] = -(mx + std::log(s));
            } else {
                psi[j] = -mx;  // propagate; NaN surfaces via the row residual
            }
        });
    }

    DualPotentials pot;
    pot.lambda = lambda;
    pot.iterations = applied;
    pot.residual = residual;
    pot.converged = converged;
    pot.f.resize(n);
    pot.g.resize(m);
    for (size_t i = 0; i < n; ++i) {
        pot.f[i] = lambda * phi[i];
        if (!std::isfinite(pot.f[i]))
            throw NumericalError("sinkhorn_potentials: non-finite potential at exit (after " + std::to_string(applied) + " updates)");
    }
    for (size_t j = 0; j < m; ++j) {
        pot.g[j] = lambda * psi[j];
        if (!std::isfinite(pot.g[j]))
            throw NumericalError("sinkhorn_potentials: non-finite potential at exit (after " + std::to_string(applied) + " updates)");
    }
    return pot;
}

TransportPlan transport_plan(const DualPotentials& pot, const CostMatrix& C, const Vector& a,
                             const Vector& b, Exec mode) {
    const size_t n = C.values.rows();
    const size_t m = C.values.cols();
    if (pot.f.size() != n || pot.g.size() != m || a.size() != n || b.size() != m)
        throw ValidationError("transport_plan: mismatched shapes");
    TransportPlan plan;
    plan.weights = Matrix(n, m);
    plan.row_marginal = a;
    plan.col_marginal = b;
    const double lambda = pot.lambda;
    for_each_index(n, mode, [&](size_t i) {
        for (size_t j = 0; j < m; ++j) {
            plan.weights(i, j) = std::exp((pot.f[i] + pot.g[j] - C.values(i, j)) / lambda) * a[i] * b[j];
        }
    });
    return plan;
}

double plan_cost(const TransportPlan& P, const CostMatrix& C) {
    if (P.weights.rows() != C.values.rows() || P.weights.cols() != C.values.cols())
        throw ValidationError("plan_cost: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < P.weights.rows(); ++i)
        for (size_t j = 0; j < P.weights.cols(); ++j) s += C.values(i, j) * P.weights(i, j);
    return s;
}

double dual_value(const DualPotentials& pot, const Vector& a, const Vector& b) {
    if (pot.f.size() != a.size() || pot.g.size() != b.size())
        throw ValidationError("dual_value: mismatched shapes");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * pot.f[i];
    for (size_t j = 0; j < b.size(); ++j) s += b[j] * pot.g[j];
    return s;
}

namespace {
inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}

Matrix sample_gradient(const Matrix& X, const Matrix& Y, const TransportPlan& P, double m,
                       double scale, Exec mode) {
    if (P.weights.rows() != X.rows() || P.weights.cols() != Y.rows() ||
        (!X.empty() && !Y.empty() && X.cols() != Y.cols()))
        throw ValidationError("sample_gradient: shape mismatch");
    const size_t d = X.cols();
    Matrix G(X.rows(), d);
    for_each_index(X.rows(), mode, [&](size_t i) {
        const double* xi = X.row(i);
        double* gi = G.row(i);
        for (size_t j = 0; j < Y.rows(); ++j) {
            const double p = P.weights(i, j);
            const double* yj = Y.row(j);
            for (size_t k = 0; k < d; ++k) {
                double diff = xi[k] - yj[k];
                gi[k] += p * (2.0 * diff + m * sign0(diff));
            }
        }
        for (size_t k = 0; k < d; ++k) gi[k] *= scale;
    });
    return G;
}

Matrix sample_gradient_cols(const Matrix& X, const Matrix& Y, const TransportPlan& P, double m,
                            double scale, Exec mode) {
    if (P.weights.rows() != X.rows() || P.weights.cols() != Y.rows() ||
        (!X.empty() && !Y.empty() && X.cols() != Y.cols()))
        throw ValidationError("sample_gradient_cols: shape mismatch");
    const size_t d = Y.cols();
    Matrix G(Y.rows(), d);
    for_each_index(Y.rows(), mode, [&](size_t j) {
        double* gj = G.row(j);
        const double* yj = Y.row(j);
        for (size_t i = 0; i < X.rows(); ++i) {
            const double p = P.weights(i, j);
            const double* xi = X.row(i);
            for (size_t k = 0; k < d; ++k) {
                double diff = yj[k] - xi[k];
                gj[k] += p * (2.0 * diff + m * sign0(diff));
            }
        }
        for (size_t k = 0; k < d; ++k) gj[k] *= scale;
    });
    return G;
}

double max_marginal_violation(const TransportPlan& P) {
    double worst = 0.0;
    for (size_t i = 0; i < P.weights.rows(); ++i) {
        double s = 0.0;
        for (size_t j = 0; j < P.weights.cols(); ++j) s += P.weights(i, j);
        worst = std::max(worst, std::abs(s - P.row_marginal[i]));
    }
    for (size_t j = 0; j < P.weights.cols(); ++j) {
        double s = 0.0;
        for (size_t i = 0; i < P.weights.rows(); ++i) s += P.weights(i, j);
        worst = std::max(worst, std::abs(s - P.col_marginal[j]));
    }
    return worst;
}

}  // namespace dpsinkhorn
