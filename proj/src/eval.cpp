#include "dpsinkhorn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dpsinkhorn/errors.hpp"
#include "dpsinkhorn/ot.hpp"

namespace dpsinkhorn {

Dataset synthesize(const GeneratorParams& theta, size_t L, size_t count, LatentKind kind,
                   CounterRng& rng) {
    if (theta.arch.input_dim < L)
        throw ValidationError("synthesize: L exceeds generator input dim");
    const size_t latent_dim = theta.arch.input_dim - L;
    Dataset out;
    out.L = L;
    out.provenance = "synthesized";
    out.labels.resize(count);
    for (size_t i = 0; i < count; ++i)
        out.labels[i] = static_cast<uint32_t>(rng.next_below(L));
    const Matrix z = sample_latents(count, latent_dim, kind, rng);
    out.samples = count > 0 ? generate(theta, z, out.labels, L)
                            : Matrix(0, theta.arch.output_dim);
    return out;
}

double downstream_utility(const Dataset& synthetic, const Dataset& real_test,
                          ClassifierKind kind, const ClassifierBudget& budget, size_t reps) {
    if (synthetic.samples.cols() != real_test.samples.cols())
        throw ValidationError("downstream_utility: feature dimensions differ");
    if (reps == 0) throw ValidationError("downstream_utility: reps must be >= 1");
    double total = 0.0;
    for (size_t rep = 0; rep < reps; ++rep) {
        ClassifierBudget b = budget;
        b.seed = budget.seed + rep;
        const ClassifierParams c = train_classifier(synthetic.samples, synthetic.labels, kind, b);
        total += accuracy(classify(c, real_test.samples), real_test.labels);
    }
    return total / static_cast<double>(reps);
}

double utility_with_generator(const GeneratorParams& theta, size_t L, LatentKind latent,
                              size_t count, const Dataset& real_test, ClassifierKind kind,
                              const ClassifierBudget& budget, CounterRng& rng, size_t reps) {
    if (reps == 0) throw ValidationError("utility_with_generator: reps must be >= 1");
    double total = 0.0;
    for (size_t rep = 0; rep < reps; ++rep) {
        CounterRng rep_rng = rng.child(rep);
        const Dataset synthetic = synthesize(theta, L, count, latent, rep_rng);
        ClassifierBudget b = budget;
        b.seed = budget.seed + rep;
        const ClassifierParams c = train_classifier(synthetic.samples, synthetic.labels, kind, b);
        total += accuracy(classify(c, real_test.samples), real_test.labels);
    }
    return total / static_cast<double>(reps);
}

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<size_t>& idx, size_t begin, size_t count) {
    Matrix out(count, src.cols());
    for (size_t i = 0; i < count; ++i)
        for (size_t j = 0; j < src.cols(); ++j) out(i, j) = src(idx[begin + i], j);
    return out;
}

double entropic_value(const Matrix& A, const Matrix& B, double lambda, double m_mix,
                      const SolverConfig& solver) {
    const CostMatrix C = cost_matrix(A, B, m_mix, solver.mode);
    const Vector wa = uniform_weights(A.rows());
    const Vector wb = uniform_weights(B.rows());
    const DualPotentials pot =
        sinkhorn_potentials(C, wa, wb, lambda, solver.max_iters, solver.tol, solver.mode);
    return plan_cost(transport_plan(pot, C, wa, wb, solver.mode), C);
}

}  // namespace

DivergenceResult divergence_metric(const Matrix& X, const Matrix& Y, double lambda,
                                   double m_mix, CounterRng rng, size_t draws,
                                   const SolverConfig& solver) {
    const size_t k = std::min(X.rows(), Y.rows()) / 2;
    if (k == 0)
        throw ValidationError("divergence_metric: need at least 2 rows per set");
    if (draws == 0) throw ValidationError("divergence_metric: draws must be >= 1");
    DivergenceResult res;
    for (size_t t = 0; t < draws; ++t) {
        // Split permutations are keyed by (seed, draw, set size) only, so
        // equal-size inputs split identically and X == Y cancels exactly.
        CounterRng rx = rng.child(t).child(X.rows());
        CounterRng ry = rng.child(t).child(Y.rows());
        const std::vector<size_t> px = rx.permutation(X.rows());
        const std::vector<size_t> py = ry.permutation(Y.rows());
        const Matrix S1 = gather_rows(X, px, 0, k);
        const Matrix S2 = gather_rows(X, px, k, k);
        const Matrix R1 = gather_rows(Y, py, 0, k);
        const Matrix R2 = gather_rows(Y, py, k, k);
        const double v = 2.0 * entropic_value(S1, R2, lambda, m_mix, solver) -
                         entropic_value(S1, S2, lambda, m_mix, solver) -
                         entropic_value(R1, R2, lambda, m_mix, solver);
        res.values.push_back(v);
    }
    double sum = 0.0;
    for (double v : res.values) sum += v;
    res.mean = sum / static_cast<double>(draws);
    double ss = 0.0;
    for (double v : res.values) ss += (v - res.mean) * (v - res.mean);
    res.std = draws > 1 ? std::sqrt(ss / static_cast<double>(draws - 1)) : 0.0;
    return res;
}

ProbeResult bias_variance_probe(const GeneratorParams& theta, const std::vector<double>& p_grid,
                                size_t batches, const Dataset& dataset, CounterRng rng,
                                const ProbeConfig& cfg) {
    if (batches < 100)
        throw ValidationError("bias_variance_probe: need at least 100 batches");
    if (std::find(p_grid.begin(), p_grid.end(), 1.0) == p_grid.end())
        throw ValidationError("bias_variance_probe: p_grid must contain 1.0 (ground-truth arm)");
    const size_t L = dataset.L;
    const size_t latent_dim = theta.arch.input_dim - L;
    const size_t n = cfg.n;
    if (dataset.samples.rows() < n)
        throw ValidationError("bias_variance_probe: dataset smaller than batch size");
    const size_t pcount = theta.arch.param_count();

    // Pre-draw the shared per-batch randomness at the maximal size 2n; each
    // arm slices the first n+n' generated rows. Pairing across arms is what
    // makes small bias differences resolvable (common random numbers).
    struct BatchDraw {
        Matrix z;
        std::vector<uint32_t> labels;
        std::vector<size_t> real_idx;
    };
    std::vector<BatchDraw> drawn(batches);
    for (size_t b = 0; b < batches; ++b) {
        CounterRng rb = rng.child(b);
        drawn[b].z = sample_latents(2 * n, latent_dim, cfg.latent, rb);
        drawn[b].labels.resize(2 * n);
        for (size_t i = 0; i < 2 * n; ++i)
            drawn[b].labels[i] = static_cast<uint32_t>(rb.next_below(L));
        const std::vector<size_t> perm = rb.permutation(dataset.samples.rows());
        drawn[b].real_idx.assign(perm.begin(), perm.begin() + n);
    }

    ProbeResult result;
    std::vector<Vector> mean_per_p(p_grid.size(), Vector(pcount, 0.0));
    std::vector<Vector> sumsq_per_p(p_grid.size(), Vector(pcount, 0.0));
    size_t p1_index = 0;

    for (size_t pi = 0; pi < p_grid.size(); ++pi) {
        const double p = p_grid[pi];
        if (p < 0.0 || p > 1.0) throw ValidationError("bias_variance_probe: p out of range");
        if (p == 1.0) p1_index = pi;
        const size_t np = debias_group_size(n, p);
        Matrix raw(cfg.keep_samples ? batches : 0, cfg.keep_samples ? pcount : 0);
        for (size_t b = 0; b < batches; ++b) {
            const BatchDraw& bd = drawn[b];
            const size_t rows = n + np;
            Matrix z(rows, latent_dim);
            std::vector<uint32_t> labels(rows);
            for (size_t i = 0; i < rows; ++i) {
                for (size_t j = 0; j < latent_dim; ++j) z(i, j) = bd.z(i, j);
                labels[i] = bd.labels[i];
            }
            SplitBatch batch;
            batch.n = n;
            batch.n_prime = np;
            batch.samples = generate(theta, z, labels, L, cfg.solver.mode);
            batch.labels = labels;
            const Dataset real = subset(dataset, bd.real_idx);
            auto loss = semi_debiased_loss(batch, real.samples, real.labels, cfg.lambda,
                                           cfg.m_mix, cfg.alpha_c, L, cfg.solver);
            // Real batches are fixed-size here, never empty.
            Matrix upstream(rows, theta.arch.output_dim);
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < upstream.cols(); ++j) upstream(i, j) = loss->grad_cross(i, j);
            for (size_t i = 0; i < np; ++i)
                for (size_t j = 0; j < upstream.cols(); ++j) upstream(n + i, j) = loss->grad_debias(i, j);
            const Vector g = flatten_grads(backprop_to_params(theta, z, labels, L, upstream, cfg.solver.mode));
            for (size_t t = 0; t < pcount; ++t) {
                mean_per_p[pi][t] += g[t];
                sumsq_per_p[pi][t] += g[t] * g[t];
            }
            if (cfg.keep_samples)
                for (size_t t = 0; t < pcount; ++t) raw(b, t) = g[t];
        }
        for (size_t t = 0; t < pcount; ++t) mean_per_p[pi][t] /= static_cast<double>(batches);
        if (cfg.keep_samples) result.samples.push_back(std::move(raw));
    }

    // Assemble rows: bias against the p=1 mean, variance normalized by p=0
    // (or by the first row when the grid lacks p=0).
    std::vector<double> trace_var(p_grid.size(), 0.0);
    for (size_t pi = 0; pi < p_grid.size(); ++pi) {
        for (size_t t = 0; t < pcount; ++t) {
            const double m = mean_per_p[pi][t];
            trace_var[pi] += (sumsq_per_p[pi][t] - static_cast<double>(batches) * m * m) /
                             static_cast<double>(batches - 1);
        }
    }
    double var0 = trace_var[0];
    for (size_t pi = 0; pi < p_grid.size(); ++pi)
        if (p_grid[pi] == 0.0) var0 = trace_var[pi];
    for (size_t pi = 0; pi < p_grid.size(); ++pi) {
        ProbeRow row;
        row.p = p_grid[pi];
        double ss = 0.0;
        for (size_t t = 0; t < pcount; ++t) {
            const double diff = mean_per_p[pi][t] - mean_per_p[p1_index][t];
            ss += diff * diff;
        }
        row.bias = std::sqrt(ss);
        row.norm_variance = trace_var[pi] / var0;
        result.rows.push_back(row);
    }
    return result;
}

namespace {

// Norm of the column mean of rows[idx] minus the column mean of ref[idx].
double bias_of_resample(const Matrix& a, const Matrix& ref, const std::vector<size_t>& idx) {
    const size_t pcount = a.cols();
    double ss = 0.0;
    for (size_t t = 0; t < pcount; ++t) {
        double ma = 0.0, mr = 0.0;
        for (size_t b : idx) {
            ma += a(b, t);
            mr += ref(b, t);
        }
        const double diff = (ma - mr) / static_cast<double>(idx.size());
        ss += diff * diff;
    }
    return std::sqrt(ss);
}

double trace_var_of_resample(const Matrix& a, const std::vector<size_t>& idx) {
    const size_t pcount = a.cols();
    const double B = static_cast<double>(idx.size());
    double total = 0.0;
    for (size_t t = 0; t < pcount; ++t) {
        double s = 0.0, ss = 0.0;
        for (size_t b : idx) {
            s += a(b, t);
            ss += a(b, t) * a(b, t);
        }
        total += (ss - s * s / B) / (B - 1.0);
    }
    return total;
}

}  // namespace

PairStats probe_bootstrap(const ProbeResult& result, const std::vector<double>& p_grid,
                          size_t idx_a, size_t idx_b, size_t replicates, CounterRng rng) {
    if (result.samples.size() != p_grid.size())
        throw ValidationError("probe_bootstrap: probe was run without keep_samples");
    size_t p1_index = p_grid.size(), p0_index = 0;
    for (size_t pi = 0; pi < p_grid.size(); ++pi) {
        if (p_grid[pi] == 1.0) p1_index = pi;
        if (p_grid[pi] == 0.0) p0_index = pi;
    }
    if (p1_index == p_grid.size())
        throw ValidationError("probe_bootstrap: p_grid must contain 1.0");
    const Matrix& A = result.samples[idx_a];
    const Matrix& B = result.samples[idx_b];
    const Matrix& G1 = result.samples[p1_index];
    const Matrix& G0 = result.samples[p0_index];
    const size_t batches = A.rows();

    PairStats out{};
    std::vector<size_t> all(batches);
    for (size_t b = 0; b < batches; ++b) all[b] = b;
    out.bias_a = bias_of_resample(A, G1, all);
    out.bias_b = bias_of_resample(B, G1, all);
    out.bias_diff = out.bias_a - out.bias_b;
    const double v0 = trace_var_of_resample(G0, all);
    out.var_a = trace_var_of_resample(A, all) / v0;
    out.var_b = trace_var_of_resample(B, all) / v0;
    out.var_diff = out.var_b - out.var_a;

    // Joint bootstrap: one shared index resample per replicate feeds every
    // arm, preserving the common-random-numbers pairing.
    double bsum = 0.0, bss = 0.0, vsum = 0.0, vss = 0.0;
    std::vector<size_t> idx(batches);
    for (size_t r = 0; r < replicates; ++r) {
        for (size_t b = 0; b < batches; ++b)
            idx[b] = static_cast<size_t>(rng.next_below(batches));
        const double bd = bias_of_resample(A, G1, idx) - bias_of_resample(B, G1, idx);
        const double vv0 = trace_var_of_resample(G0, idx);
        const double vd = (trace_var_of_resample(B, idx) - trace_var_of_resample(A, idx)) / vv0;
        bsum += bd;
        bss += bd * bd;
        vsum += vd;
        vss += vd * vd;
    }
    const double R = static_cast<double>(replicates);
    out.bias_diff_sd = std::sqrt(std::max(0.0, bss / R - (bsum / R) * (bsum / R)));
    out.var_diff_sd = std::sqrt(std::max(0.0, vss / R - (vsum / R) * (vsum / R)));
    return out;
}

void export_grid(const Matrix& images, size_t side, const std::string& path) {
    if (side == 0 || images.cols() != side * side)
        throw ValidationError("export_grid: image dim " + std::to_string(images.cols()) +
                              " does not equal side^2");
    const size_t k = images.rows();
    if (k == 0) throw ValidationError("export_grid: no images");
    const size_t gcols = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
    const size_t grows = (k + gcols - 1) / gcols;
    const size_t width = gcols * side + (gcols - 1);
    const size_t height = grows * side + (grows - 1);
    std::vector<uint8_t> pixels(width * height, 0);  // separators and empty tiles stay black
    for (size_t img = 0; img < k; ++img) {
        const size_t tr = img / gcols, tc = img % gcols;
        const size_t oy = tr * (side + 1), ox = tc * (side + 1);
        for (size_t y = 0; y < side; ++y)
            for (size_t x = 0; x < side; ++x)
                pixels[(oy + y) * width + ox + x] = denormalize(images(img, y * side + x));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("export_grid: cannot open " + path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("export_grid: write failed for " + path);
}

PgmImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError("read_pgm: not a P5 file: " + path);
    size_t w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (!in || maxval != 255) throw IoError("read_pgm: unsupported header in " + path);
    in.get();  // the single whitespace after the header
    PgmImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(w * h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(w * h));
    if (static_cast<size_t>(in.gcount()) != w * h)
        throw IoError("read_pgm: truncated pixel data in " + path);
    return img;
}

}  // namespace dpsinkhorn
