#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dpsinkhorn/data.hpp"
#include "dpsinkhorn/losses.hpp"
#include "dpsinkhorn/nn.hpp"
#include "dpsinkhorn/privacy.hpp"
#include "dpsinkhorn/rng.hpp"

namespace dpsinkhorn {

// End-to-end training orchestration: Poisson sampling, generation, the
// semi-debiased loss, sanitization, backprop, the optimizer step, privacy
// accounting, checkpointing, and budget-based stopping.

enum class Optimizer {
    kAdam,
    kSgd,
};

struct TrainConfig {
    // Batching.
    double q = 1.0 / 1200.0;  // Poisson sampling ratio
    size_t batch_n = 50;      // generated cross-group size n
    double p = 0.4;           // debiasing fraction; n' = floor(n·p)

    // Loss.
    double lambda = 0.05;
    double m_mix = 1.0;
    double alpha_c = 15.0;
    size_t sinkhorn_max_iters = 500;
    double sinkhorn_tol = 1e-6;

    // Privacy.
    bool dp_enabled = true;
    double clip_bound = 0.5;   // Δ
    double noise_scale = 1.5;  // σ
    NoiseConvention noise_convention = NoiseConvention::kAlg1;
    CompositionPolicy policy = CompositionPolicy::kPerRowNFold;
    double target_epsilon = 10.0;
    double delta = 1e-5;

    // Generator and optimizer.
    size_t latent_dim = 12;
    std::vector<size_t> hidden = {128, 128};
    LatentKind latent = LatentKind::kUniform01;
    Optimizer optimizer = Optimizer::kAdam;
    double lr = 1e-4;
    double weight_decay = 2e-5;

    // Run control. out_dir empty = no checkpoints written;
    // checkpoint_cadence 0 = only a final checkpoint.
    size_t t_max = 1000;
    uint64_t seed = 1;
    size_t checkpoint_cadence = 0;
    std::string out_dir;
    // Dataset descriptor path (see load_dataset_json); used by the CLI,
    // ignored when a Dataset is passed in directly.
    std::string data;

    Exec mode = Exec::kParallel;
};

// Throws ValidationError naming the offending field.
void validate_config(const TrainConfig& cfg);

// JSON round-trip of the config (unknown keys rejected; missing keys take
// defaults). The documented schema lives in the README.
TrainConfig config_from_json_file(const std::string& path);
std::string config_to_json(const TrainConfig& cfg);

// FNV-1a of the trajectory-determining fields (everything except out_dir and
// checkpoint_cadence), as a hex string. Checkpoints embed it; resume verifies.
std::string config_hash(const TrainConfig& cfg);

struct StepRecord {
    uint64_t step = 0;            // 1-based
    size_t real_batch_size = 0;
    bool skipped = false;         // empty real batch (still debits the ledger)
    double loss = 0.0;            // NaN when skipped
    double grad_pre_clip_max = 0.0;   // max row norm entering the sanitizer
    double grad_post_clip_max = 0.0;  // max row norm after clipping
    double epsilon = 0.0;         // cumulative ε at δ (NaN when dp disabled)
};

enum class StopReason {
    kBudgetReached,
    kTMaxReached,
    kUserStop,
};

struct TrainReport {
    std::vector<StepRecord> records;
    double final_epsilon = std::numeric_limits<double>::quiet_NaN();
    double delta = 0.0;
    StopReason stop_reason = StopReason::kTMaxReached;
    uint64_t steps_taken = 0;
    // Budget horizon from calibrate_steps (SIZE_MAX when dp is disabled).
    size_t budget_steps = 0;
};

const char* stop_reason_name(StopReason r);

// One JSON object per line: every step record, then a final summary line.
void write_report_jsonl(const std::string& path, const TrainReport& report,
                        const TrainConfig& cfg);

struct TrainState {
    GeneratorParams theta;
    AdamState adam;
    uint64_t step = 0;  // completed steps
    CounterRng sampling, latents, labels, noise;
    RdpCurve per_step;  // per-step RDP curve (empty when dp disabled)
};

// Fresh state: streams derived from cfg.seed, θ from the init stream, the
// generator output dim taken from the dataset.
TrainState init_train_state(const TrainConfig& cfg, const Dataset& dataset);

// Executes one Algorithm-1 step: Poisson-sample the real batch; draw n+n'
// latents and uniform labels; generate; semi-debiased loss; sanitize (clip
// all rows, noise the first n) when dp_enabled; backprop; optimizer step;
// advance the ledger. An empty real batch skips the update but still debits
// the ledger. Throws NumericalError on a non-finite loss.
StepRecord train_step(TrainState& state, const TrainConfig& cfg, const Dataset& dataset);

struct TrainResult {
    GeneratorParams theta;
    TrainReport report;
};

// Runs until the precomputed budget horizon (calibrate_steps) or t_max,
// checkpointing at the configured cadence. resume_dir, when nonempty, loads
// a checkpoint written by a config with the same hash and continues it.
TrainResult train(const TrainConfig& cfg, const Dataset& dataset,
                  const std::string& resume_dir = "");

// --- checkpoints -------------------------------------------------------------
// Directory layout: manifest.json (architecture, step, rng counters, config
// hash), params.f32bin (little-endian float32 parameter blob in manifest
// order — the interchange format), state.f64bin (float64 params + Adam
// moments — the exact-resume sidecar).

void save_checkpoint(const std::string& dir, const TrainState& state, const TrainConfig& cfg);
TrainState load_checkpoint(const std::string& dir, const TrainConfig& cfg);

// Loads just the generator (f32 blob) plus its latent/class metadata, for
// `generate`-style consumers that have no TrainConfig.
struct GeneratorSnapshot {
    GeneratorParams theta;
    size_t latent_dim = 0;
    size_t classes = 0;
    LatentKind latent = LatentKind::kUniform01;
    uint64_t step = 0;
};
GeneratorSnapshot load_generator(const std::string& dir);

// --- dataset loading ---------------------------------------------------------
// JSON dataset descriptors:
//   {"kind":"mixture","count":N,"seed":S,"components":[{"mean":[x,y],
//     "cov":[[a,b],[b,c]],"class":k,"weight":w}, ...]}
//   {"kind":"idx","images":"path","labels":"path","side":8}
// The idx form ingests IDX image/label files, normalizes to [−1,1] and
// bilinearly resizes square rasters to side×side.
Dataset load_dataset_json(const std::string& path);

}  // namespace dpsinkhorn
