#include "dpsinkhorn/train.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpsinkhorn/errors.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

// Binary checkpoint blobs are written in native byte order and documented as
// little-endian; this toolkit only targets little-endian hosts.
static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

namespace dpsinkhorn {

namespace {

// --- enum <-> string tables ---------------------------------------------------

const char* to_string(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd"; }
const char* to_string(NoiseConvention c) { return c == NoiseConvention::kAlg1 ? "alg1" : "text"; }
const char* to_string(CompositionPolicy p) {
    return p == CompositionPolicy::kPerRowNFold ? "per_row_n_fold" : "single_query";
}
const char* to_string(LatentKind k) { return k == LatentKind::kUniform01 ? "uniform01" : "gaussian"; }
const char* to_string(Exec e) { return e == Exec::kParallel ? "parallel" : "serial"; }

template <typename E>
E enum_from(const std::string& s, const char* field, std::initializer_list<std::pair<const char*, E>> table) {
    for (const auto& [name, value] : table)
        if (s == name) return value;
    throw ValidationError(std::string(field) + ": unknown value \"" + s + "\"");
}

Optimizer optimizer_from(const std::string& s) {
    return enum_from<Optimizer>(s, "optimizer", {{"adam", Optimizer::kAdam}, {"sgd", Optimizer::kSgd}});
}
NoiseConvention convention_from(const std::string& s) {
    return enum_from<NoiseConvention>(
        s, "noise_convention", {{"alg1", NoiseConvention::kAlg1}, {"text", NoiseConvention::kText}});
}
CompositionPolicy policy_from(const std::string& s) {
    return enum_from<CompositionPolicy>(s, "policy",
                                        {{"per_row_n_fold", CompositionPolicy::kPerRowNFold},
                                         {"single_query", CompositionPolicy::kSingleQuery}});
}
LatentKind latent_from(const std::string& s) {
    return enum_from<LatentKind>(s, "latent",
                                 {{"uniform01", LatentKind::kUniform01}, {"gaussian", LatentKind::kGaussian}});
}
Exec mode_from(const std::string& s) {
    return enum_from<Exec>(s, "mode", {{"parallel", Exec::kParallel}, {"serial", Exec::kSerial}});
}

// Trajectory-determining fields only. Excluded: out_dir, checkpoint_cadence,
// data and the execution mode (parallel and serial kernels are bitwise
// identical by construction), and t_max (a pure stopping knob — the numbers
// at any given step do not depend on it, which is what lets a finished run
// resume under a larger horizon). The privacy-contract fields
// (target_epsilon, delta) stay in: extending a budget is a new run, not a
// resume.
json trajectory_json(const TrainConfig& c) {
    json j;
    j["q"] = c.q;
    j["batch_n"] = c.batch_n;
    j["p"] = c.p;
    j["lambda"] = c.lambda;
    j["m_mix"] = c.m_mix;
    j["alpha_c"] = c.alpha_c;
    j["sinkhorn_max_iters"] = c.sinkhorn_max_iters;
    j["sinkhorn_tol"] = c.sinkhorn_tol;
    j["dp_enabled"] = c.dp_enabled;
    j["clip_bound"] = c.clip_bound;
    j["noise_scale"] = c.noise_scale;
    j["noise_convention"] = to_string(c.noise_convention);
    j["policy"] = to_string(c.policy);
    j["target_epsilon"] = c.target_epsilon;
    j["delta"] = c.delta;
    j["latent_dim"] = c.latent_dim;
    j["hidden"] = c.hidden;
    j["latent"] = to_string(c.latent);
    j["optimizer"] = to_string(c.optimizer);
    j["lr"] = c.lr;
    j["weight_decay"] = c.weight_decay;
    j["seed"] = c.seed;
    return j;
}

double row_norm(const Matrix& G, size_t i) {
    double s = 0.0;
    for (size_t k = 0; k < G.cols(); ++k) s += G(i, k) * G(i, k);
    return std::sqrt(s);
}

double current_epsilon(const TrainState& state, const TrainConfig& cfg) {
    if (!cfg.dp_enabled) return std::numeric_limits<double>::quiet_NaN();
    if (state.step == 0) return 0.0;
    return to_dp(compose(state.per_step, state.step), cfg.delta).epsilon;
}

void write_doubles(std::ofstream& out, const Vector& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vector read_doubles(std::ifstream& in, size_t count, const std::string& path) {
    Vector v(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(double))
        throw IoError("checkpoint blob truncated: " + path);
    return v;
}

json read_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + what + ": " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(std::string(what) + " " + path + ": " + e.what());
    }
    return j;
}

MlpArch arch_for(const TrainConfig& cfg, size_t L, size_t d) {
    MlpArch arch;
    arch.input_dim = cfg.latent_dim + L;
    arch.hidden = cfg.hidden;
    arch.output_dim = d;
    return arch;
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
    auto fail = [](const char* field, const char* why) {
        throw ValidationError(std::string("config field ") + field + " " + why);
    };
    if (!(cfg.q > 0.0 && cfg.q <= 1.0)) fail("q", "must be in (0, 1]");
    if (cfg.batch_n == 0) fail("batch_n", "must be at least 1");
    if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) fail("p", "must be in [0, 1]");
    if (!(cfg.lambda > 0.0)) fail("lambda", "must be positive");
    if (!(cfg.m_mix >= 0.0)) fail("m_mix", "must be non-negative");
    if (!(cfg.alpha_c >= 0.0)) fail("alpha_c", "must be non-negative");
    if (cfg.sinkhorn_max_iters == 0) fail("sinkhorn_max_iters", "must be at least 1");
    if (!(cfg.sinkhorn_tol > 0.0)) fail("sinkhorn_tol", "must be positive");
    if (!(cfg.clip_bound > 0.0)) fail("clip_bound", "must be positive");
    if (!(cfg.noise_scale > 0.0)) fail("noise_scale", "must be positive");
    if (!(cfg.target_epsilon > 0.0)) fail("target_epsilon", "must be positive");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) fail("delta", "must be in (0, 1)");
    if (cfg.latent_dim == 0) fail("latent_dim", "must be at least 1");
    if (!(cfg.lr > 0.0)) fail("lr", "must be positive");
    if (!(cfg.weight_decay >= 0.0)) fail("weight_decay", "must be non-negative");
    if (cfg.t_max == 0) fail("t_max", "must be at least 1");
}

std::string config_to_json(const TrainConfig& cfg) {
    json j = trajectory_json(cfg);
    j["t_max"] = cfg.t_max;
    j["checkpoint_cadence"] = cfg.checkpoint_cadence;
    j["out_dir"] = cfg.out_dir;
    j["data"] = cfg.data;
    j["mode"] = to_string(cfg.mode);
    return j.dump(2) + "\n";
}

TrainConfig config_from_json_file(const std::string& path) {
    json j = read_json_file(path, "config");
    if (!j.is_object()) throw ValidationError("config " + path + ": top level must be an object");

    TrainConfig cfg;
    json known = trajectory_json(cfg);
    known["t_max"] = nullptr;
    known["checkpoint_cadence"] = nullptr;
    known["out_dir"] = nullptr;
    known["data"] = nullptr;
    known["mode"] = nullptr;
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw ValidationError("config field " + key + " is not recognized");

    try {
        cfg.q = j.value("q", cfg.q);
        cfg.batch_n = j.value("batch_n", cfg.batch_n);
        cfg.p = j.value("p", cfg.p);
        cfg.lambda = j.value("lambda", cfg.lambda);
        cfg.m_mix = j.value("m_mix", cfg.m_mix);
        cfg.alpha_c = j.value("alpha_c", cfg.alpha_c);
        cfg.sinkhorn_max_iters = j.value("sinkhorn_max_iters", cfg.sinkhorn_max_iters);
        cfg.sinkhorn_tol = j.value("sinkhorn_tol", cfg.sinkhorn_tol);
        cfg.dp_enabled = j.value("dp_enabled", cfg.dp_enabled);
        cfg.clip_bound = j.value("clip_bound", cfg.clip_bound);
        cfg.noise_scale = j.value("noise_scale", cfg.noise_scale);
        if (j.contains("noise_convention")) cfg.noise_convention = convention_from(j["noise_convention"]);
        if (j.contains("policy")) cfg.policy = policy_from(j["policy"]);
        cfg.target_epsilon = j.value("target_epsilon", cfg.target_epsilon);
        cfg.delta = j.value("delta", cfg.delta);
        cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
        cfg.hidden = j.value("hidden", cfg.hidden);
        if (j.contains("latent")) cfg.latent = latent_from(j["latent"]);
        if (j.contains("optimizer")) cfg.optimizer = optimizer_from(j["optimizer"]);
        cfg.lr = j.value("lr", cfg.lr);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        cfg.t_max = j.value("t_max", cfg.t_max);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.checkpoint_cadence = j.value("checkpoint_cadence", cfg.checkpoint_cadence);
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        cfg.data = j.value("data", cfg.data);
        if (j.contains("mode")) cfg.mode = mode_from(j["mode"]);
    } catch (const json::exception& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
    // Relative dataset paths are read relative to the config file.
    if (!cfg.data.empty() && fs::path(cfg.data).is_relative())
        cfg.data = (fs::path(path).parent_path() / cfg.data).string();
    validate_config(cfg);
    return cfg;
}

std::string config_hash(const TrainConfig& cfg) {
    const std::string canonical = trajectory_json(cfg).dump();
    uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64-bit
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const char* stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::kBudgetReached: return "budget_reached";
        case StopReason::kTMaxReached: return "t_max_reached";
        case StopReason::kUserStop: return "user_stop";
    }
    return "unknown";
}

void write_report_jsonl(const std::string& path, const TrainReport& report, const TrainConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open report for writing: " + path);
    for (const StepRecord& r : report.records) {
        json j;
        j["step"] = r.step;
        j["real_batch_size"] = r.real_batch_size;
        j["skipped"] = r.skipped;
        j["loss"] = std::isfinite(r.loss) ? json(r.loss) : json(nullptr);
        j["grad_pre_clip_max"] = r.grad_pre_clip_max;
        j["grad_post_clip_max"] = r.grad_post_clip_max;
        j["epsilon"] = std::isfinite(r.epsilon) ? json(r.epsilon) : json(nullptr);
        out << j.dump() << "\n";
    }
    json s;
    s["summary"] = true;
    s["steps_taken"] = report.steps_taken;
    s["final_epsilon"] = std::isfinite(report.final_epsilon) ? json(report.final_epsilon) : json(nullptr);
    s["delta"] = report.delta;
    s["stop_reason"] = stop_reason_name(report.stop_reason);
    s["budget_steps"] =
        report.budget_steps == SIZE_MAX ? json(nullptr) : json(report.budget_steps);
    s["config_hash"] = config_hash(cfg);
    out << s.dump() << "\n";
    if (!out) throw IoError("failed writing report: " + path);
}

TrainState init_train_state(const TrainConfig& cfg, const Dataset& dataset) {
    validate_config(cfg);
    if (dataset.samples.rows() == 0) throw ValidationError("dataset has no samples");
    if (dataset.L < 1) throw ValidationError("dataset has no classes");

    TrainState state;
    state.sampling = CounterRng::derive(cfg.seed, Stream::kSampling);
    state.latents = CounterRng::derive(cfg.seed, Stream::kLatents);
    state.labels = CounterRng::derive(cfg.seed, Stream::kLabels);
    state.noise = CounterRng::derive(cfg.seed, Stream::kNoise);

    CounterRng init = CounterRng::derive(cfg.seed, Stream::kInit);
    state.theta = init_generator(arch_for(cfg, dataset.L, dataset.samples.cols()), init);
    state.adam = init_adam(state.theta.arch, cfg.lr, cfg.weight_decay);
    state.step = 0;

    if (cfg.dp_enabled) {
        SanitizerConfig scfg{cfg.clip_bound, cfg.noise_scale, cfg.noise_convention};
        AccountingPolicy policy{cfg.q, 1, cfg.policy, cfg.batch_n};
        state.per_step = per_step_curve(cfg.q, noise_multiplier(scfg), policy);
    }
    return state;
}

StepRecord train_step(TrainState& state, const TrainConfig& cfg, const Dataset& dataset) {
    const size_t n = cfg.batch_n;
    const size_t np = debias_group_size(n, cfg.p);
    const size_t L = dataset.L;

    StepRecord rec;
    rec.step = state.step + 1;

    // Real batch by Poisson subsampling.
    std::vector<size_t> picked = poisson_sample(dataset.samples.rows(), cfg.q, state.sampling);
    rec.real_batch_size = picked.size();
    Matrix Y(picked.size(), dataset.samples.cols());
    std::vector<uint32_t> y_labels(picked.size());
    for (size_t i = 0; i < picked.size(); ++i) {
        const double* src = dataset.samples.row(picked[i]);
        std::copy(src, src + dataset.samples.cols(), Y.row(i));
        y_labels[i] = dataset.labels[picked[i]];
    }

    // Generated batch: n + n' latents and uniform labels.
    SplitBatch batch;
    batch.n = n;
    batch.n_prime = np;
    Matrix z = sample_latents(n + np, cfg.latent_dim, cfg.latent, state.latents);
    batch.labels.resize(n + np);
    for (auto& l : batch.labels) l = static_cast<uint32_t>(state.labels.next_below(L));
    batch.samples = generate(state.theta, z, batch.labels, L, cfg.mode);

    SolverConfig solver{cfg.sinkhorn_max_iters, cfg.sinkhorn_tol, cfg.mode};
    std::optional<LossOutput> loss =
        semi_debiased_loss(batch, Y, y_labels, cfg.lambda, cfg.m_mix, cfg.alpha_c, L, solver);

    // Empty real batch: the release still happened, so the ledger is debited,
    // but there is no gradient and no parameter update.
    if (!loss) {
        ++state.step;
        rec.skipped = true;
        rec.loss = std::numeric_limits<double>::quiet_NaN();
        rec.epsilon = current_epsilon(state, cfg);
        return rec;
    }

    rec.loss = loss->value;
    if (!std::isfinite(loss->value))
        throw NumericalError("train_step " + std::to_string(rec.step) + ": loss is not finite");

    // Per-sample gradient matrix: cross rows first, then debias rows.
    Matrix G(n + np, dataset.samples.cols());
    for (size_t i = 0; i < n; ++i)
        std::copy(loss->grad_cross.row(i), loss->grad_cross.row(i) + G.cols(), G.row(i));
    for (size_t i = 0; i < np; ++i)
        std::copy(loss->grad_debias.row(i), loss->grad_debias.row(i) + G.cols(), G.row(n + i));

    for (size_t i = 0; i < G.rows(); ++i) rec.grad_pre_clip_max = std::max(rec.grad_pre_clip_max, row_norm(G, i));

    Matrix upstream;
    if (cfg.dp_enabled) {
        SanitizerConfig scfg{cfg.clip_bound, cfg.noise_scale, cfg.noise_convention};
        upstream = sanitize(G, scfg, n, state.noise, cfg.mode);
        rec.grad_post_clip_max = std::min(rec.grad_pre_clip_max, cfg.clip_bound);
    } else {
        upstream = std::move(G);
        rec.grad_post_clip_max = rec.grad_pre_clip_max;
    }

    GeneratorGrads grads = backprop_to_params(state.theta, z, batch.labels, L, upstream, cfg.mode);
    if (cfg.optimizer == Optimizer::kAdam)
        adam_update(state.adam, state.theta, grads);
    else
        sgd_update(state.theta, grads, cfg.lr, cfg.weight_decay);

    for (const Matrix& W : state.theta.weights)
        for (size_t i = 0; i < W.rows() * W.cols(); ++i)
            if (!std::isfinite(W.data()[i]))
                throw NumericalError("train_step " + std::to_string(rec.step) +
                                     ": parameters are not finite after the update");

    ++state.step;
    rec.epsilon = current_epsilon(state, cfg);
    return rec;
}

TrainResult train(const TrainConfig& cfg, const Dataset& dataset, const std::string& resume_dir) {
    validate_config(cfg);

    TrainState state =
        resume_dir.empty() ? init_train_state(cfg, dataset) : load_checkpoint(resume_dir, cfg);

    size_t budget_steps = SIZE_MAX;
    if (cfg.dp_enabled) {
        SanitizerConfig scfg{cfg.clip_bound, cfg.noise_scale, cfg.noise_convention};
        AccountingPolicy policy{cfg.q, 0, cfg.policy, cfg.batch_n};
        budget_steps = calibrate_steps(cfg.q, noise_multiplier(scfg), cfg.delta, cfg.target_epsilon, policy);
    }
    const size_t horizon = std::min<size_t>(cfg.t_max, budget_steps);

    TrainResult result;
    result.report.budget_steps = budget_steps;
    result.report.delta = cfg.delta;

    while (state.step < horizon) {
        result.report.records.push_back(train_step(state, cfg, dataset));
        if (!cfg.out_dir.empty() && cfg.checkpoint_cadence > 0 && state.step % cfg.checkpoint_cadence == 0)
            save_checkpoint(cfg.out_dir, state, cfg);
    }

    if (!cfg.out_dir.empty()) save_checkpoint(cfg.out_dir, state, cfg);

    result.report.steps_taken = state.step;
    result.report.final_epsilon = current_epsilon(state, cfg);
    result.report.stop_reason = (cfg.dp_enabled && budget_steps <= cfg.t_max)
                                    ? StopReason::kBudgetReached
                                    : StopReason::kTMaxReached;
    result.theta = std::move(state.theta);
    return result;
}

// --- checkpoints --------------------------------------------------------------

void save_checkpoint(const std::string& dir, const TrainState& state, const TrainConfig& cfg) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());

    const MlpArch& arch = state.theta.arch;
    json m;
    m["format"] = "dpsinkhorn-checkpoint";
    m["version"] = 1;
    m["arch"] = {{"input_dim", arch.input_dim}, {"hidden", arch.hidden}, {"output_dim", arch.output_dim}};
    m["latent_dim"] = cfg.latent_dim;
    m["classes"] = arch.input_dim - cfg.latent_dim;
    m["latent"] = to_string(cfg.latent);
    m["param_count"] = arch.param_count();
    m["step"] = state.step;
    m["adam_step"] = state.adam.step;
    m["rng"] = {{"sampling", state.sampling.counter()},
                {"latents", state.latents.counter()},
                {"labels", state.labels.counter()},
                {"noise", state.noise.counter()}};
    m["config_hash"] = config_hash(cfg);
    m["params_file"] = "params.f32bin";
    m["state_file"] = "state.f64bin";

    {
        std::ofstream out(fs::path(dir) / "manifest.json");
        if (!out) throw IoError("cannot write checkpoint manifest in " + dir);
        out << m.dump(2) << "\n";
    }

    // Interchange blob: float32, manifest parameter order.
    Vector flat = flatten_params(state.theta);
    {
        std::vector<float> f32(flat.begin(), flat.end());
        std::ofstream out(fs::path(dir) / "params.f32bin", std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint params in " + dir);
        out.write(reinterpret_cast<const char*>(f32.data()),
                  static_cast<std::streamsize>(f32.size() * sizeof(float)));
        if (!out) throw IoError("failed writing checkpoint params in " + dir);
    }

    // Exact-resume sidecar: float64 parameters plus Adam moments.
    {
        std::ofstream out(fs::path(dir) / "state.f64bin", std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint state in " + dir);
        write_doubles(out, flat);
        write_doubles(out, flatten_grads(state.adam.m));
        write_doubles(out, flatten_grads(state.adam.v));
        if (!out) throw IoError("failed writing checkpoint state in " + dir);
    }
}

namespace {

MlpArch arch_from_manifest(const json& m) {
    MlpArch arch;
    try {
        arch.input_dim = m.at("arch").at("input_dim").get<size_t>();
        arch.hidden = m.at("arch").at("hidden").get<std::vector<size_t>>();
        arch.output_dim = m.at("arch").at("output_dim").get<size_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("checkpoint manifest: ") + e.what());
    }
    return arch;
}

}  // namespace

TrainState load_checkpoint(const std::string& dir, const TrainConfig& cfg) {
    json m = read_json_file((fs::path(dir) / "manifest.json").string(), "checkpoint manifest");
    const std::string want = config_hash(cfg);
    const std::string have = m.value("config_hash", "");
    if (have != want)
        throw ValidationError("checkpoint config_hash " + have + " does not match the run config " +
                              want + "; resuming under a different config is not supported");

    MlpArch arch = arch_from_manifest(m);
    const size_t P = arch.param_count();

    const std::string state_path = (fs::path(dir) / "state.f64bin").string();
    std::ifstream in(state_path, std::ios::binary);
    if (!in)
        throw IoError("checkpoint state sidecar missing: " + state_path +
                      " (exact resume needs the float64 state, not just params.f32bin)");

    TrainState state;
    state.theta = zeros_like_params(arch);
    unflatten_params(state.theta, read_doubles(in, P, state_path));
    state.adam = init_adam(arch, cfg.lr, cfg.weight_decay);

    GeneratorParams moments = zeros_like_params(arch);
    unflatten_params(moments, read_doubles(in, P, state_path));
    state.adam.m.weights = moments.weights;
    state.adam.m.biases = moments.biases;
    unflatten_params(moments, read_doubles(in, P, state_path));
    state.adam.v.weights = moments.weights;
    state.adam.v.biases = moments.biases;

    state.step = m.value("step", uint64_t{0});
    state.adam.step = m.value("adam_step", uint64_t{0});

    uint64_t c_sampling, c_latents, c_labels, c_noise;
    try {
        c_sampling = m.at("rng").at("sampling").get<uint64_t>();
        c_latents = m.at("rng").at("latents").get<uint64_t>();
        c_labels = m.at("rng").at("labels").get<uint64_t>();
        c_noise = m.at("rng").at("noise").get<uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("checkpoint manifest: ") + e.what());
    }
    state.sampling = CounterRng::derive(cfg.seed, Stream::kSampling);
    state.sampling.set_counter(c_sampling);
    state.latents = CounterRng::derive(cfg.seed, Stream::kLatents);
    state.latents.set_counter(c_latents);
    state.labels = CounterRng::derive(cfg.seed, Stream::kLabels);
    state.labels.set_counter(c_labels);
    state.noise = CounterRng::derive(cfg.seed, Stream::kNoise);
    state.noise.set_counter(c_noise);

    if (cfg.dp_enabled) {
        SanitizerConfig scfg{cfg.clip_bound, cfg.noise_scale, cfg.noise_convention};
        AccountingPolicy policy{cfg.q, 1, cfg.policy, cfg.batch_n};
        state.per_step = per_step_curve(cfg.q, noise_multiplier(scfg), policy);
    }
    return state;
}

GeneratorSnapshot load_generator(const std::string& dir) {
    json m = read_json_file((fs::path(dir) / "manifest.json").string(), "checkpoint manifest");
    GeneratorSnapshot snap;
    MlpArch arch = arch_from_manifest(m);
    try {
        snap.latent_dim = m.at("latent_dim").get<size_t>();
        snap.classes = m.at("classes").get<size_t>();
        snap.latent = latent_from(m.at("latent").get<std::string>());
        snap.step = m.value("step", uint64_t{0});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("checkpoint manifest: ") + e.what());
    }

    const std::string params_path = (fs::path(dir) / m.value("params_file", "params.f32bin")).string();
    std::ifstream in(params_path, std::ios::binary);
    if (!in) throw IoError("checkpoint params missing: " + params_path);
    const size_t P = arch.param_count();
    std::vector<float> f32(P);
    in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(P * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != P * sizeof(float))
        throw IoError("checkpoint blob truncated: " + params_path);

    snap.theta = zeros_like_params(arch);
    Vector flat(f32.begin(), f32.end());
    unflatten_params(snap.theta, flat);
    return snap;
}

// --- dataset loading ----------------------------------------------------------

Dataset load_dataset_json(const std::string& path) {
    json j = read_json_file(path, "dataset descriptor");
    const fs::path base = fs::path(path).parent_path();
    const std::string kind = j.value("kind", "");

    try {
        if (kind == "mixture") {
            std::vector<MixtureComponent> components;
            for (const json& c : j.at("components")) {
                MixtureComponent comp;
                const json& mean = c.at("mean");
                const json& cov = c.at("cov");
                if (mean.size() != 2)
                    throw ValidationError("mixture component mean must have exactly 2 entries");
                if (cov.size() != 2 || cov.at(0).size() != 2 || cov.at(1).size() != 2)
                    throw ValidationError("mixture component cov must be a 2x2 matrix");
                comp.mean[0] = mean.at(0).get<double>();
                comp.mean[1] = mean.at(1).get<double>();
                for (int r = 0; r < 2; ++r)
                    for (int s = 0; s < 2; ++s) comp.cov[r][s] = cov.at(r).at(s).get<double>();
                comp.class_id = c.at("class").get<uint32_t>();
                comp.weight = c.at("weight").get<double>();
                components.push_back(comp);
            }
            const size_t count = j.at("count").get<size_t>();
            const uint64_t seed = j.value("seed", uint64_t{1});
            CounterRng rng = CounterRng::derive(seed, Stream::kSampling);
            return synth_mixture(components, count, rng);
        }
        if (kind == "idx") {
            auto resolve = [&](const std::string& p) {
                return fs::path(p).is_absolute() ? p : (base / p).string();
            };
            IdxTensor images = read_idx(resolve(j.at("images").get<std::string>()));
            IdxTensor labels = read_idx(resolve(j.at("labels").get<std::string>()));
            if (labels.dims.size() != 1)
                throw ValidationError("dataset labels IDX must be one-dimensional");
            if (images.count() != labels.count())
                throw ValidationError("dataset image/label counts differ: " +
                                      std::to_string(images.count()) + " vs " +
                                      std::to_string(labels.count()));

            Dataset ds;
            ds.samples = normalize(images);
            if (j.contains("side")) {
                const size_t side = j.at("side").get<size_t>();
                ds.samples = downsample(ds.samples, side);
            }
            ds.labels.assign(labels.payload.begin(), labels.payload.end());
            uint32_t max_label = 0;
            for (uint32_t l : ds.labels) max_label = std::max(max_label, l);
            ds.L = static_cast<size_t>(max_label) + 1;
            ds.provenance = "idx:" + j.at("images").get<std::string>();
            return ds;
        }
    } catch (const json::exception& e) {
        throw ValidationError("dataset descriptor " + path + ": " + e.what());
    }
    throw ValidationError("dataset descriptor " + path + ": kind must be \"mixture\" or \"idx\"");
}

}  // namespace dpsinkhorn
