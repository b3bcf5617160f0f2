#include "dpsinkhorn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "dpsinkhorn/errors.hpp"

namespace dpsinkhorn {

std::vector<size_t> MlpArch::layer_dims() const {
    std::vector<size_t> dims;
    dims.push_back(input_dim);
    for (size_t h : hidden) dims.push_back(h);
    dims.push_back(output_dim);
    return dims;
}

size_t MlpArch::param_count() const {
    const auto dims = layer_dims();
    size_t count = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l) count += dims[l] * dims[l + 1] + dims[l + 1];
    return count;
}

namespace {

void validate_arch(const MlpArch& arch) {
    if (arch.input_dim == 0 || arch.output_dim == 0)
        throw ValidationError("MlpArch: input and output dims must be positive");
    for (size_t h : arch.hidden)
        if (h == 0) throw ValidationError("MlpArch: hidden widths must be positive");
}

// out = A·W + b, rows of A processed independently.
void affine_forward(const Matrix& A, const Matrix& W, const Vector& b, Matrix& out, Exec mode) {
    for_each_index(A.rows(), mode, [&](size_t i) {
        const double* ai = A.row(i);
        double* oi = out.row(i);
        for (size_t j = 0; j < W.cols(); ++j) oi[j] = b[j];
        for (size_t kk = 0; kk < A.cols(); ++kk) {
            const double a = ai[kk];
            const double* wr = W.row(kk);
            for (size_t j = 0; j < W.cols(); ++j) oi[j] += a * wr[j];
        }
    });
}

// dW(i,j) = Σ_k A(k,i)·Δ(k,j), parallel over flattened entries with a fixed
// inner order so the sum is bitwise independent of partitioning.
void weight_grad(const Matrix& A, const Matrix& delta, Matrix& dW, Exec mode) {
    const size_t in = dW.rows(), out = dW.cols();
    for_each_index(in * out, mode, [&](size_t idx) {
        const size_t i = idx / out, j = idx % out;
        double s = 0.0;
        for (size_t k = 0; k < A.rows(); ++k) s += A(k, i) * delta(k, j);
        dW(i, j) = s;
    });
}

void bias_grad(const Matrix& delta, Vector& db, Exec mode) {
    for_each_index(db.size(), mode, [&](size_t j) {
        double s = 0.0;
        for (size_t k = 0; k < delta.rows(); ++k) s += delta(k, j);
        db[j] = s;
    });
}

// dA = Δ·Wᵀ, rows independent.
void input_grad(const Matrix& delta, const Matrix& W, Matrix& dA, Exec mode) {
    for_each_index(delta.rows(), mode, [&](size_t k) {
        const double* dk = delta.row(k);
        double* ak = dA.row(k);
        for (size_t i = 0; i < W.rows(); ++i) {
            double s = 0.0;
            const double* wi = W.row(i);
            for (size_t j = 0; j < W.cols(); ++j) s += dk[j] * wi[j];
            ak[i] = s;
        }
    });
}

Matrix assemble_input(const Matrix& z, const std::vector<uint32_t>& labels, size_t L,
                      size_t expected_dim) {
    if (labels.size() != z.rows())
        throw ValidationError("generate: label count does not match latent rows");
    if (z.cols() + L != expected_dim)
        throw ValidationError("generate: latent dim " + std::to_string(z.cols()) + " + L " +
                              std::to_string(L) + " does not match generator input dim " +
                              std::to_string(expected_dim));
    Matrix in(z.rows(), expected_dim);
    for (size_t i = 0; i < z.rows(); ++i) {
        if (labels[i] >= L)
            throw ValidationError("generate: label " + std::to_string(labels[i]) + " out of range");
        for (size_t j = 0; j < z.cols(); ++j) in(i, j) = z(i, j);
        in(i, z.cols() + labels[i]) = 1.0;
    }
    return in;
}

// Forward pass keeping post-activation values of every layer (the tape the
// backward pass consumes; rectifier and tanh derivatives are both functions
// of the post-activation).
std::vector<Matrix> forward_tape(const GeneratorParams& theta, const Matrix& input, Exec mode) {
    std::vector<Matrix> acts;
    acts.push_back(input);
    const size_t layers = theta.weights.size();
    for (size_t l = 0; l < layers; ++l) {
        Matrix out(acts.back().rows(), theta.weights[l].cols());
        affine_forward(acts.back(), theta.weights[l], theta.biases[l], out, mode);
        const bool last = l + 1 == layers;
        for_each_index(out.rows(), mode, [&](size_t i) {
            double* oi = out.row(i);
            for (size_t j = 0; j < out.cols(); ++j)
                oi[j] = last ? std::tanh(oi[j]) : std::max(0.0, oi[j]);
        });
        acts.push_back(std::move(out));
    }
    return acts;
}

}  // namespace

GeneratorParams init_generator(const MlpArch& arch, CounterRng& rng) {
    validate_arch(arch);
    GeneratorParams p;
    p.arch = arch;
    const auto dims = arch.layer_dims();
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix W(dims[l], dims[l + 1]);
        const bool last = l + 2 == dims.size();
        // He scale for the rectifier layers; the tanh output layer starts
        // smaller so initial samples sit near the center of the range.
        const double scale = (last ? 1.0 : std::sqrt(2.0)) / std::sqrt(static_cast<double>(dims[l]));
        for (size_t i = 0; i < W.rows(); ++i)
            for (size_t j = 0; j < W.cols(); ++j) W(i, j) = scale * rng.next_gaussian();
        p.weights.push_back(std::move(W));
        p.biases.emplace_back(dims[l + 1], 0.0);
    }
    return p;
}

Matrix sample_latents(size_t k, size_t latent_dim, LatentKind kind, CounterRng& rng) {
    Matrix z(k, latent_dim);
    for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < latent_dim; ++j)
            z(i, j) = kind == LatentKind::kUniform01 ? rng.next_unit() : rng.next_gaussian();
    return z;
}

GeneratorParams zeros_like_params(const MlpArch& arch) {
    validate_arch(arch);
    GeneratorParams p;
    p.arch = arch;
    const auto dims = arch.layer_dims();
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        p.weights.emplace_back(dims[l], dims[l + 1]);
        p.biases.emplace_back(dims[l + 1], 0.0);
    }
    return p;
}

GeneratorGrads zeros_like_grads(const MlpArch& arch) {
    GeneratorGrads g;
    const auto dims = arch.layer_dims();
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        g.weights.emplace_back(dims[l], dims[l + 1]);
        g.biases.emplace_back(dims[l + 1], 0.0);
    }
    return g;
}

Vector flatten_params(const GeneratorParams& p) {
    Vector flat;
    flat.reserve(p.arch.param_count());
    for (size_t l = 0; l < p.weights.size(); ++l) {
        flat.insert(flat.end(), p.weights[l].data(), p.weights[l].data() + p.weights[l].size());
        flat.insert(flat.end(), p.biases[l].begin(), p.biases[l].end());
    }
    return flat;
}

void unflatten_params(GeneratorParams& p, const Vector& flat) {
    if (flat.size() != p.arch.param_count())
        throw ValidationError("unflatten_params: size mismatch");
    size_t off = 0;
    for (size_t l = 0; l < p.weights.size(); ++l) {
        std::copy(flat.begin() + off, flat.begin() + off + p.weights[l].size(), p.weights[l].data());
        off += p.weights[l].size();
        std::copy(flat.begin() + off, flat.begin() + off + p.biases[l].size(), p.biases[l].begin());
        off += p.biases[l].size();
    }
}

Vector flatten_grads(const GeneratorGrads& g) {
    Vector flat;
    for (size_t l = 0; l < g.weights.size(); ++l) {
        flat.insert(flat.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
        flat.insert(flat.end(), g.biases[l].begin(), g.biases[l].end());
    }
    return flat;
}

Matrix generate(const GeneratorParams& theta, const Matrix& z,
                const std::vector<uint32_t>& labels, size_t L, Exec mode) {
    const Matrix input = assemble_input(z, labels, L, theta.arch.input_dim);
    return forward_tape(theta, input, mode).back();
}

GeneratorGrads backprop_to_params(const GeneratorParams& theta, const Matrix& z,
                                  const std::vector<uint32_t>& labels, size_t L,
                                  const Matrix& upstream, Exec mode) {
    const Matrix input = assemble_input(z, labels, L, theta.arch.input_dim);
    const auto acts = forward_tape(theta, input, mode);
    if (upstream.rows() != acts.back().rows() || upstream.cols() != acts.back().cols())
        throw ValidationError("backprop_to_params: upstream shape mismatch");

    GeneratorGrads grads = zeros_like_grads(theta.arch);
    const size_t layers = theta.weights.size();
    Matrix delta(upstream.rows(), upstream.cols());
    // Seed with the tanh derivative of the output layer.
    for_each_index(delta.rows(), mode, [&](size_t i) {
        for (size_t j = 0; j < delta.cols(); ++j) {
            const double y = acts[layers](i, j);
            delta(i, j) = upstream(i, j) * (1.0 - y * y);
        }
    });
    for (size_t l = layers; l-- > 0;) {
        weight_grad(acts[l], delta, grads.weights[l], mode);
        bias_grad(delta, grads.biases[l], mode);
        if (l == 0) break;
        Matrix prev(delta.rows(), theta.weights[l].rows());
        input_grad(delta, theta.weights[l], prev, mode);
        // Rectifier derivative of the hidden layer l−1 (post-activation > 0).
        for_each_index(prev.rows(), mode, [&](size_t i) {
            for (size_t j = 0; j < prev.cols(); ++j)
                if (!(acts[l](i, j) > 0.0)) prev(i, j) = 0.0;
        });
        delta = std::move(prev);
    }
    return grads;
}

AdamState init_adam(const MlpArch& arch, double lr, double weight_decay) {
    AdamState s;
    s.m = zeros_like_grads(arch);
    s.v = zeros_like_grads(arch);
    s.lr = lr;
    s.weight_decay = weight_decay;
    return s;
}

namespace {

void adam_apply(double* theta, double* m, double* v, const double* g, size_t count,
                const AdamState& s, double bc1, double bc2) {
    for (size_t k = 0; k < count; ++k) {
        theta[k] *= 1.0 - s.lr * s.weight_decay;
        m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g[k];
        v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g[k] * g[k];
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        theta[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps_hat);
    }
}

}  // namespace

void adam_update(AdamState& state, GeneratorParams& theta, const GeneratorGrads& grads) {
    if (grads.weights.size() != theta.weights.size() || grads.biases.size() != theta.biases.size())
        throw ValidationError("adam_update: gradient shape mismatch");
    for (size_t l = 0; l < theta.weights.size(); ++l)
        if (grads.weights[l].rows() != theta.weights[l].rows() ||
            grads.weights[l].cols() != theta.weights[l].cols() ||
            grads.biases[l].size() != theta.biases[l].size())
            throw ValidationError("adam_update: gradient shape mismatch at layer " +
                                  std::to_string(l));
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t l = 0; l < theta.weights.size(); ++l) {
        adam_apply(theta.weights[l].data(), state.m.weights[l].data(), state.v.weights[l].data(),
                   grads.weights[l].data(), theta.weights[l].size(), state, bc1, bc2);
        adam_apply(theta.biases[l].data(), state.m.biases[l].data(), state.v.biases[l].data(),
                   grads.biases[l].data(), theta.biases[l].size(), state, bc1, bc2);
    }
}

void sgd_update(GeneratorParams& theta, const GeneratorGrads& grads, double lr,
                double weight_decay) {
    for (size_t l = 0; l < theta.weights.size(); ++l) {
        double* w = theta.weights[l].data();
        const double* g = grads.weights[l].data();
        for (size_t k = 0; k < theta.weights[l].size(); ++k)
            w[k] = w[k] * (1.0 - lr * weight_decay) - lr * g[k];
        for (size_t k = 0; k < theta.biases[l].size(); ++k)
            theta.biases[l][k] = theta.biases[l][k] * (1.0 - lr * weight_decay) - lr * grads.biases[l][k];
    }
}

// --- classifiers -------------------------------------------------------------

namespace {

// Row-wise softmax in place (max-shifted).
void softmax_rows(Matrix& scores, Exec mode) {
    for_each_index(scores.rows(), mode, [&](size_t i) {
        double* r = scores.row(i);
        double mx = r[0];
        for (size_t j = 1; j < scores.cols(); ++j) mx = std::max(mx, r[j]);
        double s = 0.0;
        for (size_t j = 0; j < scores.cols(); ++j) {
            r[j] = std::exp(r[j] - mx);
            s += r[j];
        }
        for (size_t j = 0; j < scores.cols(); ++j) r[j] /= s;
    });
}

}  // namespace

ClassifierParams train_classifier(const Matrix& features, const std::vector<uint32_t>& labels,
                                  ClassifierKind kind, const ClassifierBudget& budget, Exec mode) {
    if (features.rows() == 0 || labels.size() != features.rows())
        throw ValidationError("train_classifier: features/labels mismatch or empty");
    std::set<uint32_t> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2)
        throw ValidationError("train_classifier: need at least 2 classes, got " +
                              std::to_string(distinct.size()));
    const size_t classes = static_cast<size_t>(*distinct.rbegin()) + 1;
    const size_t k = features.rows();
    const size_t d = features.cols();

    ClassifierParams c;
    c.kind = kind;
    c.classes = classes;
    CounterRng init_rng = CounterRng::derive(budget.seed, Stream::kInit);
    if (kind == ClassifierKind::kLogreg) {
        c.weights.emplace_back(d, classes);
        c.biases.emplace_back(classes, 0.0);
    } else {
        Matrix W1(d, budget.hidden_width);
        const double s1 = std::sqrt(2.0 / static_cast<double>(d));
        for (size_t i = 0; i < W1.rows(); ++i)
            for (size_t j = 0; j < W1.cols(); ++j) W1(i, j) = s1 * init_rng.next_gaussian();
        c.weights.push_back(std::move(W1));
        c.biases.emplace_back(budget.hidden_width, 0.0);
        c.weights.emplace_back(budget.hidden_width, classes);
        c.biases.emplace_back(classes, 0.0);
    }

    const double inv_k = 1.0 / static_cast<double>(k);
    for (size_t iter = 0; iter < budget.iters; ++iter) {
        // Forward.
        Matrix h;                       // hidden activations (kMlp only)
        const Matrix* last_in = &features;
        if (kind == ClassifierKind::kMlp) {
            h = Matrix(k, c.weights[0].cols());
            affine_forward(features, c.weights[0], c.biases[0], h, mode);
            for_each_index(k, mode, [&](size_t i) {
                double* r = h.row(i);
                for (size_t j = 0; j < h.cols(); ++j) r[j] = std::max(0.0, r[j]);
            });
            last_in = &h;
        }
        const size_t out_layer = c.weights.size() - 1;
        Matrix probs(k, classes);
        affine_forward(*last_in, c.weights[out_layer], c.biases[out_layer], probs, mode);
        softmax_rows(probs, mode);
        // Cross-entropy gradient at the logits: (softmax − onehot)/k.
        for_each_index(k, mode, [&](size_t i) {
            probs(i, labels[i]) -= 1.0;
            double* r = probs.row(i);
            for (size_t j = 0; j < classes; ++j) r[j] *= inv_k;
        });
        // Backward + SGD step.
        Matrix dW(c.weights[out_layer].rows(), classes);
        Vector db(classes, 0.0);
        weight_grad(*last_in, probs, dW, mode);
        bias_grad(probs, db, mode);
        if (kind == ClassifierKind::kMlp) {
            Matrix dh(k, c.weights[0].cols());
            input_grad(probs, c.weights[1], dh, mode);
            for_each_index(k, mode, [&](size_t i) {
                for (size_t j = 0; j < dh.cols(); ++j)
                    if (!(h(i, j) > 0.0)) dh(i, j) = 0.0;
            });
            Matrix dW1(d, c.weights[0].cols());
            Vector db1(c.weights[0].cols(), 0.0);
            weight_grad(features, dh, dW1, mode);
            bias_grad(dh, db1, mode);
            for (size_t t = 0; t < dW1.size(); ++t) c.weights[0].data()[t] -= budget.lr * dW1.data()[t];
            for (size_t t = 0; t < db1.size(); ++t) c.biases[0][t] -= budget.lr * db1[t];
        }
        for (size_t t = 0; t < dW.size(); ++t) c.weights[out_layer].data()[t] -= budget.lr * dW.data()[t];
        for (size_t t = 0; t < db.size(); ++t) c.biases[out_layer][t] -= budget.lr * db[t];
    }
    return c;
}

Matrix classifier_scores(const ClassifierParams& c, const Matrix& features, Exec mode) {
    if (c.weights.empty() || features.cols() != c.weights[0].rows())
        throw ValidationError("classifier_scores: feature dim mismatch");
    Matrix cur = features;
    for (size_t l = 0; l < c.weights.size(); ++l) {
        Matrix out(cur.rows(), c.weights[l].cols());
        affine_forward(cur, c.weights[l], c.biases[l], out, mode);
        if (l + 1 < c.weights.size()) {
            for_each_index(out.rows(), mode, [&](size_t i) {
                double* r = out.row(i);
                for (size_t j = 0; j < out.cols(); ++j) r[j] = std::max(0.0, r[j]);
            });
        }
        cur = std::move(out);
    }
    return cur;
}

std::vector<uint32_t> classify(const ClassifierParams& c, const Matrix& features, Exec mode) {
    const Matrix scores = classifier_scores(c, features, mode);
    std::vector<uint32_t> out(scores.rows());
    for (size_t i = 0; i < scores.rows(); ++i) {
        size_t best = 0;
        for (size_t j = 1; j < scores.cols(); ++j)
            if (scores(i, j) > scores(i, best)) best = j;
        out[i] = static_cast<uint32_t>(best);
    }
    return out;
}

double accuracy(const std::vector<uint32_t>& predicted, const std::vector<uint32_t>& truth) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw ValidationError("accuracy: size mismatch or empty");
    size_t hits = 0;
    for (size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace dpsinkhorn
