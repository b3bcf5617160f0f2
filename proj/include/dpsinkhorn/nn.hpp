#pragma once

#include <cstdint>
#include <vector>

#include "dpsinkhorn/kernels.hpp"
#include "dpsinkhorn/matrix.hpp"
#include "dpsinkhorn/rng.hpp"

namespace dpsinkhorn {

// Minimal differentiable generator (MLP, rectifier hidden layers, tanh
// output), reverse-mode parameter gradients, Adam with decoupled weight
// decay, and classifier heads for evaluation.

// Layer sizes: input_dim = latent_dim + L (one-hot class block), hidden
// widths, then output_dim = sample dimension d.
struct MlpArch {
    size_t input_dim = 0;
    std::vector<size_t> hidden;
    size_t output_dim = 0;

    // Sizes of consecutive layers: input, hidden..., output.
    std::vector<size_t> layer_dims() const;
    size_t param_count() const;
    bool operator==(const MlpArch&) const = default;
};

// θ: per-layer weight matrices (in×out) and bias vectors.
struct GeneratorParams {
    MlpArch arch;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

// Gradients shaped like GeneratorParams.
struct GeneratorGrads {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

// He-style random initialization (Gaussian, scale √(2/fan_in); final layer
// scaled down) from the init stream.
GeneratorParams init_generator(const MlpArch& arch, CounterRng& rng);

// Generator latent distribution.
enum class LatentKind {
    kUniform01,  // z ~ Unif[0,1), the training default
    kGaussian,
};

// k×latent_dim latent draws from the given stream.
Matrix sample_latents(size_t k, size_t latent_dim, LatentKind kind, CounterRng& rng);

GeneratorParams zeros_like_params(const MlpArch& arch);
GeneratorGrads zeros_like_grads(const MlpArch& arch);

// Flatten/unflatten in manifest order: layer 0 weights row-major, layer 0
// biases, layer 1 weights, ... (the checkpoint blob order).
Vector flatten_params(const GeneratorParams& p);
void unflatten_params(GeneratorParams& p, const Vector& flat);
Vector flatten_grads(const GeneratorGrads& g);

// Forward pass: rows of z concatenated with one-hot(labels), hidden layers
// with max(0,·), final layer tanh — outputs in (−1,1). k×output_dim.
Matrix generate(const GeneratorParams& theta, const Matrix& z,
                const std::vector<uint32_t>& labels, size_t L,
                Exec mode = Exec::kParallel);

// Reverse-mode accumulation of ∇_θ ⟨generate(θ,·), upstream⟩ through the
// tanh, rectifier and affine layers. upstream is k×output_dim.
GeneratorGrads backprop_to_params(const GeneratorParams& theta, const Matrix& z,
                                  const std::vector<uint32_t>& labels, size_t L,
                                  const Matrix& upstream, Exec mode = Exec::kParallel);

// Adam optimizer state; moments shaped like the parameters.
struct AdamState {
    GeneratorGrads m;  // first moments
    GeneratorGrads v;  // second moments
    uint64_t step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 2e-5;
    double eps_hat = 1e-8;
};

AdamState init_adam(const MlpArch& arch, double lr, double weight_decay);

// One bias-corrected Adam step, with decoupled weight decay applied as
// θ ← θ·(1 − lr·wd) before the moment update. Increments the step counter.
void adam_update(AdamState& state, GeneratorParams& theta, const GeneratorGrads& grads);

// Plain SGD step θ ← θ(1 − lr·wd) − lr·g (same decoupled decay), for the
// optimizer-robustness sweeps.
void sgd_update(GeneratorParams& theta, const GeneratorGrads& grads, double lr,
                double weight_decay);

// --- classifier heads -------------------------------------------------------

enum class ClassifierKind {
    kLogreg,  // multinomial logistic regression
    kMlp,     // one rectifier hidden layer, then softmax
};

struct ClassifierBudget {
    size_t iters = 400;       // full-batch gradient-descent steps
    double lr = 0.5;
    size_t hidden_width = 32; // kMlp only
    uint64_t seed = 1;        // init stream seed (kMlp init; kLogreg starts at 0)
};

struct ClassifierParams {
    ClassifierKind kind = ClassifierKind::kLogreg;
    size_t classes = 0;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

// Trains by full-batch gradient descent on the multinomial cross-entropy,
// deterministic given budget.seed. Throws ValidationError when fewer than two
// classes are present.
ClassifierParams train_classifier(const Matrix& features, const std::vector<uint32_t>& labels,
                                  ClassifierKind kind, const ClassifierBudget& budget = {},
                                  Exec mode = Exec::kParallel);

// Class scores (k×classes) and argmax predictions.
Matrix classifier_scores(const ClassifierParams& c, const Matrix& features,
                         Exec mode = Exec::kParallel);
std::vector<uint32_t> classify(const ClassifierParams& c, const Matrix& features,
                               Exec mode = Exec::kParallel);

// Fraction of matching labels.
double accuracy(const std::vector<uint32_t>& predicted, const std::vector<uint32_t>& truth);

}  // namespace dpsinkhorn
