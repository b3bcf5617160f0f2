// Command-line front end: train / generate / account / eval / probe.
// Machine-readable results go to stdout as JSON; human summaries go to
// stderr so pipelines stay clean. Exit codes: 0 success, 2 validation,
// 3 IO, 4 numerical failure.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpsinkhorn/data.hpp"
#include "dpsinkhorn/errors.hpp"
#include "dpsinkhorn/eval.hpp"
#include "dpsinkhorn/kernels.hpp"
#include "dpsinkhorn/nn.hpp"
#include "dpsinkhorn/privacy.hpp"
#include "dpsinkhorn/train.hpp"

using json = nlohmann::json;
using namespace dpsinkhorn;

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

// "0:10,1:20" → 10 zeros then 20 ones. Classes must be < L.
std::vector<uint32_t> parse_label_spec(const std::string& s, size_t L) {
    std::vector<uint32_t> labels;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            throw ValidationError("--labels entries must be class:count, got \"" + part + "\"");
        size_t cls, cnt;
        try {
            cls = std::stoul(part.substr(0, colon));
            cnt = std::stoul(part.substr(colon + 1));
        } catch (const std::exception&) {
            throw ValidationError("--labels entries must be class:count, got \"" + part + "\"");
        }
        if (cls >= L)
            throw ValidationError("--labels class " + std::to_string(cls) + " out of range (checkpoint has " +
                                  std::to_string(L) + " classes)");
        labels.insert(labels.end(), cnt, static_cast<uint32_t>(cls));
    }
    return labels;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> grid;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            grid.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw ValidationError("--p-grid must be a comma-separated list of numbers, got \"" + part + "\"");
        }
    }
    if (grid.empty()) throw ValidationError("--p-grid is empty");
    return grid;
}

struct TrainArgs {
    std::string config, out_dir, resume, data, report;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg = config_from_json_file(a.config);
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (!a.data.empty()) cfg.data = a.data;
    if (cfg.data.empty())
        throw ValidationError("config field data must name a dataset descriptor (or pass --data)");

    Dataset dataset = load_dataset_json(cfg.data);
    std::cerr << "training on " << dataset.samples.rows() << " samples (" << dataset.L
              << " classes, dim " << dataset.samples.cols() << ")" << std::endl;

    TrainResult result = train(cfg, dataset, a.resume);
    if (!a.report.empty()) write_report_jsonl(a.report, result.report, cfg);

    const char* convention = cfg.noise_convention == NoiseConvention::kAlg1 ? "alg1" : "text";
    json j;
    j["steps_taken"] = result.report.steps_taken;
    j["new_steps"] = result.report.records.size();
    j["stop_reason"] = stop_reason_name(result.report.stop_reason);
    j["budget_steps"] =
        result.report.budget_steps == SIZE_MAX ? json(nullptr) : json(result.report.budget_steps);
    j["epsilon"] = finite_or_null(result.report.final_epsilon);
    j["delta"] = result.report.delta;
    j["noise_convention"] = convention;
    j["dp_enabled"] = cfg.dp_enabled;
    j["checkpoint"] = cfg.out_dir;
    j["config_hash"] = config_hash(cfg);
    emit(j);

    if (!a.resume.empty() && result.report.records.empty())
        std::cerr << "checkpoint is already at step " << result.report.steps_taken
                  << ", at or past the run horizon; nothing to do" << std::endl;
    else if (cfg.dp_enabled)
        std::cerr << "finished at step " << result.report.steps_taken << ": (epsilon="
                  << result.report.final_epsilon << ", delta=" << result.report.delta
                  << ") under the " << convention << " convention" << std::endl;
    else
        std::cerr << "finished at step " << result.report.steps_taken << " (dp disabled)" << std::endl;
    return kExitOk;
}

struct GenerateArgs {
    std::string ckpt, out = "generated.json", labels, grid;
    size_t count = 0;
    bool count_given = false;
    uint64_t seed = 0;
    size_t side = 0;
};

int run_generate(const GenerateArgs& a) {
    GeneratorSnapshot snap = load_generator(a.ckpt);
    const size_t L = snap.classes;

    std::vector<uint32_t> labels;
    if (!a.labels.empty()) {
        labels = parse_label_spec(a.labels, L);
        if (a.count_given && a.count != labels.size())
            throw ValidationError("--count " + std::to_string(a.count) + " disagrees with --labels total " +
                                  std::to_string(labels.size()));
    } else {
        CounterRng label_rng = CounterRng::derive(a.seed, Stream::kLabels);
        labels.resize(a.count);
        for (auto& l : labels) l = static_cast<uint32_t>(label_rng.next_below(L));
    }

    CounterRng latent_rng = CounterRng::derive(a.seed, Stream::kLatents);
    Matrix z = sample_latents(labels.size(), snap.latent_dim, snap.latent, latent_rng);
    Matrix samples = generate(snap.theta, z, labels, L);

    json j;
    j["count"] = samples.rows();
    j["dim"] = samples.cols();
    j["classes"] = L;
    j["seed"] = a.seed;
    j["labels"] = labels;
    json rows = json::array();
    for (size_t i = 0; i < samples.rows(); ++i)
        rows.push_back(std::vector<double>(samples.row(i), samples.row(i) + samples.cols()));
    j["samples"] = std::move(rows);

    std::ofstream out(a.out);
    if (!out) throw IoError("cannot open output file: " + a.out);
    out << j.dump() << "\n";
    if (!out) throw IoError("failed writing output file: " + a.out);

    if (!a.grid.empty()) {
        size_t side = a.side;
        if (side == 0) {
            side = static_cast<size_t>(std::lround(std::sqrt(static_cast<double>(samples.cols()))));
            if (side * side != samples.cols())
                throw ValidationError("--grid needs --side: sample dim " + std::to_string(samples.cols()) +
                                      " is not a perfect square");
        }
        export_grid(samples, side, a.grid);
    }

    json summary;
    summary["written"] = a.out;
    summary["count"] = samples.rows();
    if (!a.grid.empty()) summary["grid"] = a.grid;
    emit(summary);
    std::cerr << "wrote " << samples.rows() << " samples to " << a.out << std::endl;
    return kExitOk;
}

struct AccountArgs {
    double q = 0.0, sigma = 0.0, delta = 1e-5, target_eps = 0.0;
    size_t steps = 1, n = 50;
    std::string convention = "alg1", policy = "perrow";
    bool target_given = false;
};

int run_account(const AccountArgs& a) {
    if (!(a.q >= 0.0 && a.q <= 1.0)) throw ValidationError("account flag q must be in [0, 1]");
    if (!(a.sigma > 0.0)) throw ValidationError("account flag sigma must be positive");
    if (!(a.delta > 0.0 && a.delta < 1.0)) throw ValidationError("account flag delta must be in (0, 1)");
    if (a.n == 0) throw ValidationError("account flag n must be at least 1");

    NoiseConvention convention;
    if (a.convention == "alg1")
        convention = NoiseConvention::kAlg1;
    else if (a.convention == "text")
        convention = NoiseConvention::kText;
    else
        throw ValidationError("account flag convention must be alg1 or text");

    CompositionPolicy comp;
    if (a.policy == "perrow")
        comp = CompositionPolicy::kPerRowNFold;
    else if (a.policy == "single")
        comp = CompositionPolicy::kSingleQuery;
    else
        throw ValidationError("account flag policy must be perrow or single");

    // The clip bound cancels out of the noise multiplier: std/(2Δ).
    const double z = convention == NoiseConvention::kAlg1 ? a.sigma : a.sigma / 2.0;
    AccountingPolicy policy{a.q, a.steps, comp, a.n};
    RdpCurve step_curve = per_step_curve(a.q, z, policy);
    RdpCurve total = compose(step_curve, a.steps);
    DpPoint dp = to_dp(total, a.delta);

    json j;
    j["q"] = a.q;
    j["sigma"] = a.sigma;
    j["noise_multiplier"] = z;
    j["convention"] = a.convention;
    j["policy"] = a.policy;
    j["n"] = a.n;
    j["steps"] = a.steps;
    j["delta"] = a.delta;
    j["orders"] = total.orders;
    j["rdp_per_step"] = step_curve.epsilons;
    j["rdp_total"] = total.epsilons;
    j["epsilon"] = dp.epsilon;
    j["best_order"] = dp.best_order;
    if (a.target_given) {
        if (!(a.target_eps > 0.0)) throw ValidationError("account flag target-eps must be positive");
        j["target_epsilon"] = a.target_eps;
        j["calibrated_steps"] = calibrate_steps(a.q, z, a.delta, a.target_eps, policy);
    }
    emit(j);
    std::cerr << "epsilon " << dp.epsilon << " at delta " << a.delta << " after " << a.steps
              << " steps (best order " << dp.best_order << ")" << std::endl;
    return kExitOk;
}

struct EvalArgs {
    std::string ckpt, data, classifier = "logreg";
    size_t count = 500, draws = 5, reps = 3;
    double lambda = 1.0, m_mix = 1.0;
    uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
    Dataset real = load_dataset_json(a.data);
    CounterRng rng = CounterRng::derive(a.seed, Stream::kEval);

    json j;
    if (a.ckpt.empty()) {
        // No generator: measure the dataset against itself (a zero baseline
        // for the divergence and a quick solver sanity check).
        DivergenceResult div = divergence_metric(real.samples, real.samples, a.lambda, a.m_mix, rng, a.draws);
        j["divergence"] = {{"mean", div.mean}, {"std", div.std}, {"values", div.values}};
        j["utility"] = nullptr;
        emit(j);
        std::cerr << "self divergence " << div.mean << " over " << div.values.size() << " draws" << std::endl;
        return kExitOk;
    }

    GeneratorSnapshot snap = load_generator(a.ckpt);
    Dataset synth = synthesize(snap.theta, snap.classes, a.count, snap.latent, rng);
    DivergenceResult div = divergence_metric(synth.samples, real.samples, a.lambda, a.m_mix, rng.child(1), a.draws);

    ClassifierKind kind = a.classifier == "mlp" ? ClassifierKind::kMlp : ClassifierKind::kLogreg;
    if (a.classifier != "mlp" && a.classifier != "logreg")
        throw ValidationError("eval flag classifier must be logreg or mlp");
    CounterRng urng = rng.child(2);
    double utility = utility_with_generator(snap.theta, snap.classes, snap.latent, a.count, real, kind,
                                            ClassifierBudget{}, urng, a.reps);

    j["divergence"] = {{"mean", div.mean}, {"std", div.std}, {"values", div.values}};
    j["utility"] = utility;
    j["count"] = a.count;
    j["classifier"] = a.classifier;
    emit(j);
    std::cerr << "divergence " << div.mean << ", downstream accuracy " << utility << std::endl;
    return kExitOk;
}

struct ProbeArgs {
    std::string ckpt, data, p_grid = "0,0.4,1", csv;
    size_t batches = 100, n = 50;
    double lambda = 1.0;
    uint64_t seed = 1;
};

int run_probe(const ProbeArgs& a) {
    Dataset real = load_dataset_json(a.data);
    std::vector<double> grid = parse_grid(a.p_grid);

    ProbeConfig cfg;
    cfg.n = a.n;
    cfg.lambda = a.lambda;
    cfg.keep_samples = false;

    GeneratorParams theta;
    if (a.ckpt.empty()) {
        // Fresh generator: probe the loss itself rather than a trained model.
        MlpArch arch;
        arch.input_dim = 12 + real.L;
        arch.hidden = {128, 128};
        arch.output_dim = real.samples.cols();
        CounterRng init = CounterRng::derive(a.seed, Stream::kInit);
        theta = init_generator(arch, init);
    } else {
        GeneratorSnapshot snap = load_generator(a.ckpt);
        theta = snap.theta;
        cfg.latent = snap.latent;
    }

    CounterRng rng = CounterRng::derive(a.seed, Stream::kEval);
    ProbeResult result = bias_variance_probe(theta, grid, a.batches, real, rng, cfg);

    json rows = json::array();
    for (const ProbeRow& r : result.rows)
        rows.push_back({{"p", r.p}, {"bias", r.bias}, {"norm_variance", r.norm_variance}});
    json j;
    j["rows"] = rows;
    j["batches"] = a.batches;
    j["lambda"] = a.lambda;
    emit(j);

    if (!a.csv.empty()) {
        std::ofstream out(a.csv);
        if (!out) throw IoError("cannot open csv output: " + a.csv);
        out << "p,bias,norm_variance\n";
        for (const ProbeRow& r : result.rows)
            out << r.p << "," << r.bias << "," << r.norm_variance << "\n";
        if (!out) throw IoError("failed writing csv output: " + a.csv);
    }
    std::cerr << "probe finished over " << grid.size() << " grid points x " << a.batches
              << " batches" << std::endl;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentially private generative training with entropic optimal-transport losses"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Cap worker threads (default: hardware)");

    TrainArgs ta;
    CLI::App* t = app.add_subcommand("train", "Train a generator from a JSON config");
    t->add_option("--config", ta.config, "Training config JSON")->required();
    t->add_option("--out", ta.out_dir, "Checkpoint directory (overrides config out_dir)");
    t->add_option("--resume", ta.resume, "Checkpoint directory to resume from");
    t->add_option("--data", ta.data, "Dataset descriptor JSON (overrides config data)");
    t->add_option("--report", ta.report, "Per-step JSONL report path");

    GenerateArgs ga;
    CLI::App* g = app.add_subcommand("generate", "Sample from a trained generator");
    g->add_option("--ckpt", ga.ckpt, "Checkpoint directory")->required();
    CLI::Option* count_opt = g->add_option("--count", ga.count, "Number of samples");
    g->add_option("--seed", ga.seed, "Sampling seed")->required();
    g->add_option("--labels", ga.labels, "Per-class counts, e.g. 0:10,1:20");
    g->add_option("--out", ga.out, "Output JSON path (default generated.json)");
    g->add_option("--grid", ga.grid, "Also write a PGM tile sheet here");
    g->add_option("--side", ga.side, "Image side length for --grid (default: sqrt of dim)");

    AccountArgs aa;
    CLI::App* ac = app.add_subcommand("account", "Privacy accounting for a run shape");
    ac->add_option("--q", aa.q, "Poisson sampling ratio")->required();
    ac->add_option("--sigma", aa.sigma, "Noise scale sigma")->required();
    ac->add_option("--steps", aa.steps, "Composition steps (default 1)");
    ac->add_option("--delta", aa.delta, "Target delta (default 1e-5)");
    ac->add_option("--convention", aa.convention, "Noise convention: alg1 or text");
    ac->add_option("--policy", aa.policy, "Per-step composition: perrow or single");
    ac->add_option("--n", aa.n, "Batch rows for the perrow policy (default 50)");
    CLI::Option* target_opt = ac->add_option("--target-eps", aa.target_eps, "Also calibrate max steps to this epsilon");

    EvalArgs ea;
    CLI::App* ev = app.add_subcommand("eval", "Divergence and downstream utility of a checkpoint");
    ev->add_option("--data", ea.data, "Dataset descriptor JSON")->required();
    ev->add_option("--ckpt", ea.ckpt, "Checkpoint directory (omit to score the dataset against itself)");
    ev->add_option("--count", ea.count, "Synthetic sample count (default 500)");
    ev->add_option("--draws", ea.draws, "Divergence subsample draws (default 5)");
    ev->add_option("--reps", ea.reps, "Classifier repetitions (default 3)");
    ev->add_option("--lambda", ea.lambda, "Entropic weight for the divergence (default 1.0)");
    ev->add_option("--m-mix", ea.m_mix, "Mixed-cost weight (default 1.0)");
    ev->add_option("--classifier", ea.classifier, "logreg or mlp");
    ev->add_option("--seed", ea.seed, "Evaluation seed");

    ProbeArgs pa;
    CLI::App* pr = app.add_subcommand("probe", "Bias-variance probe over the debias fraction p");
    pr->add_option("--data", pa.data, "Dataset descriptor JSON")->required();
    pr->add_option("--ckpt", pa.ckpt, "Checkpoint directory (omit for a fresh generator)");
    pr->add_option("--p-grid", pa.p_grid, "Comma-separated p values, must include 1 (default 0,0.4,1)");
    pr->add_option("--batches", pa.batches, "Batches per grid point (default 100)");
    pr->add_option("--n", pa.n, "Cross-group size per batch (default 50)");
    pr->add_option("--lambda", pa.lambda, "Entropic weight (default 1.0)");
    pr->add_option("--seed", pa.seed, "Probe seed");
    pr->add_option("--csv", pa.csv, "Also write rows as CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0; genuine parse problems map to the
        // validation exit code.
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    set_max_threads(threads);
    ga.count_given = count_opt->count() > 0;
    aa.target_given = target_opt->count() > 0;

    try {
        if (t->parsed()) return run_train(ta);
        if (g->parsed()) return run_generate(ga);
        if (ac->parsed()) return run_account(aa);
        if (ev->parsed()) return run_eval(ea);
        if (pr->parsed()) return run_probe(pa);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return kExitValidation;
}
