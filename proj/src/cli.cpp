#include "atnl/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "atnl/analysis.hpp"
#include "atnl/annotator.hpp"
#include "atnl/io.hpp"
#include "atnl/parallel.hpp"
#include "atnl/rng.hpp"
#include "atnl/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace atnl::cli {

namespace {

// ---------------------------------------------------------------------------
// Config access with field paths in error messages.

const json& require_field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) {
        throw FormatError("config: missing field '" + (path.empty() ? key : path + "." + key) + "'");
    }
    return j.at(key);
}

std::string joined(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

double num_field(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number()) throw FormatError("config: '" + joined(path, key) + "' must be a number");
    return v.get<double>();
}

double num_field_or(const json& j, const std::string& key, const std::string& path, double fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return num_field(j, key, path);
}

long int_field(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number_integer()) throw FormatError("config: '" + joined(path, key) + "' must be an integer");
    return v.get<long>();
}

long int_field_or(const json& j, const std::string& key, const std::string& path, long fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return int_field(j, key, path);
}

bool bool_field_or(const json& j, const std::string& key, const std::string& path, bool fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) throw FormatError("config: '" + joined(path, key) + "' must be a boolean");
    return v.get<bool>();
}

std::string str_field(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_string()) throw FormatError("config: '" + joined(path, key) + "' must be a string");
    return v.get<std::string>();
}

// ---------------------------------------------------------------------------
// Section parsers.

NoiseSpec parse_noise(const json& j, const std::string& path, std::uint64_t seed) {
    NoiseSpec spec;
    const std::string kind = str_field(j, "kind", path);
    if (kind == "symmetric") {
        spec.kind = NoiseKind::symmetric;
    } else if (kind == "pair") {
        spec.kind = NoiseKind::pair;
    } else {
        throw FormatError("config: '" + joined(path, "kind") + "' must be 'symmetric' or 'pair'");
    }
    spec.rate = num_field(j, "rate", path);
    if (spec.rate < 0.0 || spec.rate > 1.0) {
        throw FormatError("config: '" + joined(path, "rate") + "' outside [0,1]");
    }
    spec.seed = seed;
    return spec;
}

NoisyDataset parse_dataset(const json& j, const std::string& path, std::uint64_t base_seed,
                           const std::string& seed_label) {
    const std::string kind = str_field(j, "kind", path);
    NoisyDataset ds;
    if (kind == "mnist_idx") {
        ds = load_mnist_idx(str_field(j, "images", path), str_field(j, "labels", path),
                            static_cast<std::size_t>(int_field(j, "subset", path)),
                            derive_seed(base_seed, seed_label + ".subset"));
    } else if (kind == "synth") {
        ds = synth_binary(static_cast<std::size_t>(int_field(j, "n", path)),
                          static_cast<std::size_t>(int_field(j, "flip_count", path)),
                          derive_seed(base_seed, seed_label + ".synth"));
    } else {
        throw FormatError("config: '" + joined(path, "kind") + "' must be 'mnist_idx' or 'synth'");
    }
    if (j.contains("noise")) {
        ds = inject_noise(ds, parse_noise(j.at("noise"), joined(path, "noise"),
                                          derive_seed(base_seed, seed_label + ".noise")));
    }
    return ds;
}

AttackConfig parse_attack(const json& j, const std::string& path, std::uint64_t seed,
                          bool default_random_start) {
    AttackConfig cfg;
    cfg.epsilon = num_field(j, "epsilon", path);
    cfg.max_steps = static_cast<int>(int_field_or(j, "steps", path, 20));
    cfg.alpha = num_field_or(j, "alpha", path, cfg.epsilon / 4.0);
    cfg.random_start = bool_field_or(j, "random_start", path, default_random_start);
    cfg.seed = seed;
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw FormatError("config: '" + path + "': " + e.what());
    }
    return cfg;
}

OptimizerSpec parse_optimizer(const json& j, const std::string& path) {
    OptimizerSpec spec;
    const std::string kind = str_field(j, "kind", path);
    if (kind == "sgd_momentum") {
        spec.kind = OptKind::sgd_momentum;
    } else if (kind == "adam") {
        spec.kind = OptKind::adam;
    } else {
        throw FormatError("config: '" + joined(path, "kind") + "' must be 'sgd_momentum' or 'adam'");
    }
    spec.learning_rate = num_field(j, "lr", path);
    spec.momentum = num_field_or(j, "momentum", path, 0.9);
    spec.beta1 = num_field_or(j, "beta1", path, 0.9);
    spec.beta2 = num_field_or(j, "beta2", path, 0.999);
    spec.eps = num_field_or(j, "eps", path, 1e-8);
    spec.weight_decay = num_field_or(j, "weight_decay", path, 0.0);
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw FormatError("config: '" + path + "': " + e.what());
    }
    return spec;
}

TrainConfig parse_train(const json& j, const std::string& path, std::uint64_t base_seed) {
    TrainConfig cfg;
    const std::string mode = str_field(j, "mode", path);
    if (mode == "standard") {
        cfg.mode = TrainMode::standard;
    } else if (mode == "adversarial") {
        cfg.mode = TrainMode::adversarial;
    } else {
        throw FormatError("config: '" + joined(path, "mode") + "' must be 'standard' or 'adversarial'");
    }
    cfg.epochs = static_cast<int>(int_field(j, "epochs", path));
    cfg.batch_size = static_cast<int>(int_field(j, "batch_size", path));
    cfg.optimizer = parse_optimizer(require_field(j, "optimizer", path), joined(path, "optimizer"));
    if (j.contains("lr_milestones")) {
        for (const auto& m : j.at("lr_milestones")) {
            if (!m.is_array() || m.size() != 2) {
                throw FormatError("config: '" + joined(path, "lr_milestones") +
                                  "' entries must be [epoch, multiplier]");
            }
            cfg.schedule.milestones.emplace_back(m[0].get<int>(), m[1].get<double>());
        }
        try {
            cfg.schedule.validate();
        } catch (const std::exception& e) {
            throw FormatError("config: '" + joined(path, "lr_milestones") + "': " + e.what());
        }
    }
    if (cfg.mode == TrainMode::adversarial) {
        cfg.attack = parse_attack(require_field(j, "attack", path), joined(path, "attack"),
                                  derive_seed(base_seed, "attack"), /*default_random_start=*/true);
    }
    if (j.contains("eval_attack")) {
        cfg.eval_attack = parse_attack(j.at("eval_attack"), joined(path, "eval_attack"),
                                       derive_seed(base_seed, "eval-attack"), true);
    } else if (cfg.attack) {
        cfg.eval_attack = default_eval_attack(cfg.attack->epsilon, derive_seed(base_seed, "eval-attack"));
    }
    cfg.robust_eval_every = static_cast<int>(int_field_or(j, "robust_eval_every", path, 0));
    cfg.track_kappa = bool_field_or(j, "track_kappa", path, false);
    cfg.seed = derive_seed(base_seed, "train");
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw FormatError("config: '" + path + "': " + e.what());
    }
    return cfg;
}

Model parse_model(const json& root, std::size_t input_dim, int class_count, std::uint64_t base_seed) {
    std::vector<std::size_t> sizes;
    if (root.contains("model")) {
        const json& layers = require_field(root.at("model"), "layers", "model");
        sizes = layers.get<std::vector<std::size_t>>();
    } else {
        sizes = {input_dim, 256, 256, static_cast<std::size_t>(class_count)};
    }
    if (sizes.front() != input_dim) {
        throw FormatError("config: model.layers[0] = " + std::to_string(sizes.front()) +
                          " does not match dataset feature dim " + std::to_string(input_dim));
    }
    if (sizes.back() != static_cast<std::size_t>(class_count)) {
        throw FormatError("config: model.layers last = " + std::to_string(sizes.back()) +
                          " does not match dataset class count " + std::to_string(class_count));
    }
    return Model::mlp_new(sizes, derive_seed(base_seed, "model-init"));
}

// ---------------------------------------------------------------------------
// Run directory bookkeeping.

std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class RunDir {
public:
    RunDir(std::string command, fs::path dir, json resolved_config)
        : command_(std::move(command)), dir_(std::move(dir)), config_(std::move(resolved_config)) {
        fs::create_directories(dir_);
        started_ = iso8601_utc_now();
        write_text_file((dir_ / "config.json").string(), config_.dump(2) + "\n");
        record("config.json");
    }

    const fs::path& dir() const { return dir_; }

    void write(const std::string& name, const std::string& content) {
        write_text_file((dir_ / name).string(), content);
        record(name);
    }

    void write_checkpoint(const std::string& name, const Checkpoint& ckpt) {
        save_checkpoint((dir_ / name).string(), ckpt);
        record(name);
    }

    void note(const std::string& key, const json& value) { notes_[key] = value; }

    void finalize() {
        json manifest;
        manifest["command"] = command_;
        manifest["artifact_version"] = kVersion;
        manifest["modules"] = {
            {"autodiff", kVersion}, {"models", kVersion},   {"data_noise", kVersion},
            {"attack", kVersion},   {"training", kVersion}, {"analysis", kVersion},
            {"annotator", kVersion}, {"cli", kVersion}};
        manifest["config"] = config_;
        manifest["threads"] = thread_count();
        manifest["started"] = started_;
        manifest["finished"] = iso8601_utc_now();
        if (!notes_.empty()) manifest["notes"] = notes_;
        json outs = json::array();
        for (const auto& name : outputs_) {
            const fs::path p = dir_ / name;
            outs.push_back({{"path", name},
                            {"bytes", fs::file_size(p)},
                            {"sha256", sha256_file_hex(p.string())}});
        }
        manifest["outputs"] = outs;
        write_text_file((dir_ / "manifest.json").string(), manifest.dump(2) + "\n");
    }

private:
    void record(const std::string& name) { outputs_.push_back(name); }

    std::string command_;
    fs::path dir_;
    json config_;
    json notes_;
    std::string started_;
    std::vector<std::string> outputs_;
};

json dataset_manifest(const NoisyDataset& ds, const json& spec) {
    json j;
    j["n"] = ds.size();
    j["feature_dim"] = ds.feature_dim();
    j["class_count"] = ds.class_count;
    j["corrupted_count"] = ds.corrupted_count();
    j["spec"] = spec;
    return j;
}

json eval_to_json(const EvalResult& r) {
    json j;
    j["standard_acc"] = r.standard_acc;
    if (r.robust_acc) j["robust_acc"] = *r.robust_acc;
    if (r.standard_acc_correct) j["standard_acc_correct"] = *r.standard_acc_correct;
    if (r.standard_acc_incorrect) j["standard_acc_incorrect"] = *r.standard_acc_incorrect;
    if (r.robust_acc_correct) j["robust_acc_correct"] = *r.robust_acc_correct;
    if (r.robust_acc_incorrect) j["robust_acc_incorrect"] = *r.robust_acc_incorrect;
    return j;
}

json load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": invalid config: " + e.what());
    }
    if (!j.is_object()) throw FormatError(path + ": config must be a JSON object");
    if (seed_override) {
        j["seed"] = *seed_override;
    } else if (!j.contains("seed")) {
        throw FormatError(path + ": missing 'seed' (or pass --seed)");
    }
    return j;
}

// ---------------------------------------------------------------------------
// synth: decision grids and neighborhood agreement on the 2-D set.

std::string grid_csv(const Model& model, int grid) {
    const double cell = 1.0 / grid;
    std::vector<double> coords;
    coords.reserve(static_cast<std::size_t>(grid) * grid * 2);
    for (int r = 0; r < grid; ++r) {
        for (int c = 0; c < grid; ++c) {
            coords.push_back((c + 0.5) * cell);
            coords.push_back((r + 0.5) * cell);
        }
    }
    Tensor pts({static_cast<std::size_t>(grid) * grid, 2}, std::move(coords));
    Tensor probs = kernels::softmax_rows(model.logits(pts));
    std::string out = "x,y,predicted,confidence\n";
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        const int pred = argmax_row(probs.row(i));
        out += format_f6(pts.at(i, 0));
        out += ',' + format_f6(pts.at(i, 1));
        out += ',' + std::to_string(pred);
        out += ',' + format_f6(probs.row(i)[static_cast<std::size_t>(pred)]);
        out += '\n';
    }
    return out;
}

// Fraction of neighborhood samples predicted as `label` around `center`.
double neighborhood_agreement(const Model& model, std::span<const double> center, int label,
                              double epsilon, int n_samples, std::uint64_t seed) {
    const std::size_t d = center.size();
    Tensor pts({static_cast<std::size_t>(n_samples), d});
    Rng rng(seed);
    auto p = pts.data();
    for (int s = 0; s < n_samples; ++s) {
        for (std::size_t j = 0; j < d; ++j) {
            const double lo = std::max(0.0, center[j] - epsilon);
            const double hi = std::min(1.0, center[j] + epsilon);
            p[static_cast<std::size_t>(s) * d + j] = rng.uniform(lo, hi);
        }
    }
    std::vector<int> preds = model.predict(pts);
    double hits = 0;
    for (int pr : preds) hits += pr == label;
    return hits / n_samples;
}

// Full-batch training on the synthetic set; steps = "iterations" of Adam.
Model train_synth_model(const NoisyDataset& ds, int pgd_steps, double epsilon, double alpha,
                        double lr, int iterations, const std::vector<std::size_t>& sizes,
                        std::uint64_t base_seed) {
    Model model = Model::mlp_new(sizes, derive_seed(base_seed, "model-init"));
    TrainConfig cfg;
    cfg.mode = pgd_steps > 0 ? TrainMode::adversarial : TrainMode::standard;
    cfg.epochs = iterations;  // one full batch per epoch
    cfg.batch_size = static_cast<int>(ds.size());
    cfg.optimizer.kind = OptKind::adam;
    cfg.optimizer.learning_rate = lr;
    if (pgd_steps > 0) {
        AttackConfig atk;
        atk.epsilon = epsilon;
        atk.alpha = alpha;
        atk.max_steps = pgd_steps;
        atk.random_start = true;
        atk.seed = derive_seed(base_seed, "attack");
        cfg.attack = atk;
    }
    cfg.seed = derive_seed(base_seed, "train");
    NoisyDataset no_test;
    train(model, ds, cfg, no_test);
    return model;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    json cfg = load_config(config_path, seed_override);
    const std::uint64_t base_seed = cfg.at("seed").get<std::uint64_t>();
    const json& sc = require_field(cfg, "synth", "");
    const std::size_t n = static_cast<std::size_t>(int_field_or(sc, "n", "synth", 23));
    const std::size_t flips = static_cast<std::size_t>(int_field_or(sc, "flip_count", "synth", 2));
    const double epsilon = num_field_or(sc, "epsilon", "synth", 0.08);
    const double alpha = num_field_or(sc, "alpha", "synth", 0.02);
    const double lr = num_field_or(sc, "learning_rate", "synth", 0.001);
    const int iterations = static_cast<int>(int_field_or(sc, "iterations", "synth", 1000));
    const int grid = static_cast<int>(int_field_or(sc, "grid", "synth", 200));
    const int nb_samples = static_cast<int>(int_field_or(sc, "neighborhood_samples", "synth", 100));
    std::vector<int> pgd_sweep = {1, 2, 3, 4};
    if (sc.contains("pgd_steps")) pgd_sweep = sc.at("pgd_steps").get<std::vector<int>>();
    std::vector<std::size_t> sizes = {2, 32, 32, 32, 32, 2};
    if (sc.contains("hidden")) {
        sizes = {2};
        for (auto h : sc.at("hidden").get<std::vector<std::size_t>>()) sizes.push_back(h);
        sizes.push_back(2);
    }

    RunDir run("synth", out_dir, cfg);
    NoisyDataset ds = synth_binary(n, flips, derive_seed(base_seed, "dataset.synth"));
    run.write("dataset_synth.json", dataset_manifest(ds, sc).dump(2) + "\n");

    // ST plus the PGD sweep; each model gets a decision grid, and the
    // flipped points get neighborhood agreement stats per model.
    std::string agreement =
        "model,point_index,x,y,observed_label,true_label,agreement\n";
    auto emit_agreement = [&](const std::string& name, const Model& model) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (!ds.corrupted[i]) continue;
            const double agr = neighborhood_agreement(
                model, ds.features.row(i), ds.observed[i], epsilon, nb_samples,
                derive_seed(base_seed, "agreement", i));
            agreement += name;
            agreement += ',' + std::to_string(i);
            agreement += ',' + format_f6(ds.features.at(i, 0));
            agreement += ',' + format_f6(ds.features.at(i, 1));
            agreement += ',' + std::to_string(ds.observed[i]);
            agreement += ',' + std::to_string(ds.truth[i]);
            agreement += ',' + format_f6(agr);
            agreement += '\n';
        }
    };

    Model st = train_synth_model(ds, 0, epsilon, alpha, lr, iterations, sizes, base_seed);
    run.write("grid_st.csv", grid_csv(st, grid));
    emit_agreement("st", st);
    for (int steps : pgd_sweep) {
        Model at = train_synth_model(ds, steps, epsilon, alpha, lr, iterations, sizes, base_seed);
        run.write("grid_at_pgd" + std::to_string(steps) + ".csv", grid_csv(at, grid));
        emit_agreement("at_pgd" + std::to_string(steps), at);
    }
    run.write("agreement.csv", agreement);
    run.note("neighborhood_epsilon", epsilon);
    run.finalize();
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
    json cfg = load_config(config_path, seed_override);
    const std::uint64_t base_seed = cfg.at("seed").get<std::uint64_t>();

    NoisyDataset train_ds = parse_dataset(require_field(cfg, "dataset", ""), "dataset", base_seed, "dataset");
    NoisyDataset test_ds;
    if (cfg.contains("test_dataset")) {
        test_ds = parse_dataset(cfg.at("test_dataset"), "test_dataset", base_seed, "test-dataset");
    }
    Model model = parse_model(cfg, train_ds.feature_dim(), train_ds.class_count, base_seed);
    TrainConfig tc = parse_train(require_field(cfg, "train", ""), "train", base_seed);

    std::vector<int> ckpt_epochs;
    if (cfg.at("train").contains("checkpoint_epochs")) {
        ckpt_epochs = cfg.at("train").at("checkpoint_epochs").get<std::vector<int>>();
    }

    RunDir run("train", out_dir, cfg);
    run.write("dataset_train.json", dataset_manifest(train_ds, cfg.at("dataset")).dump(2) + "\n");
    if (test_ds.size() > 0) {
        run.write("dataset_test.json", dataset_manifest(test_ds, cfg.at("test_dataset")).dump(2) + "\n");
    }

    std::map<std::string, std::uint64_t> lineage = {
        {"base", base_seed},
        {"model_init", derive_seed(base_seed, "model-init")},
        {"train", tc.seed}};

    TrainHooks hooks;
    hooks.after_epoch = [&](int epoch, const Model& m, const OptimizerState& opt, const EpochMetrics&) {
        if (std::find(ckpt_epochs.begin(), ckpt_epochs.end(), epoch) == ckpt_epochs.end()) return;
        char name[64];
        std::snprintf(name, sizeof name, "checkpoint_epoch_%03d.json", epoch);
        run.write_checkpoint(name, {m, opt.spec.kind, opt.step_count, lineage});
    };

    std::vector<EpochMetrics> metrics = train(model, train_ds, tc, test_ds, &hooks);
    run.write("metrics.csv", metrics_csv(metrics));
    run.write_checkpoint("checkpoint_final.json",
                         {model, tc.optimizer.kind,
                          static_cast<long>(metrics.size()) *
                              ((static_cast<long>(train_ds.size()) + tc.batch_size - 1) / tc.batch_size),
                          lineage});

    json final_eval;
    final_eval["train"] = eval_to_json(evaluate(model, train_ds, tc.eval_attack));
    if (test_ds.size() > 0) final_eval["test"] = eval_to_json(evaluate(model, test_ds, tc.eval_attack));
    run.write("final_eval.json", final_eval.dump(2) + "\n");
    run.note("kappa_random_start", false);
    run.finalize();
    return 0;
}

// ---------------------------------------------------------------------------
// kappa: per-sample tables, histograms, AUROC summary, ranking.

int cmd_kappa(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override, const std::string& checkpoint_override) {
    json cfg = load_config(config_path, seed_override);
    const std::uint64_t base_seed = cfg.at("seed").get<std::uint64_t>();

    NoisyDataset ds = parse_dataset(require_field(cfg, "dataset", ""), "dataset", base_seed, "dataset");
    AttackConfig atk = parse_attack(require_field(cfg, "attack", ""), "attack",
                                    derive_seed(base_seed, "kappa-attack"),
                                    /*default_random_start=*/false);

    std::vector<std::string> checkpoints;
    if (!checkpoint_override.empty()) {
        checkpoints.push_back(checkpoint_override);
    } else if (cfg.contains("checkpoints")) {
        checkpoints = cfg.at("checkpoints").get<std::vector<std::string>>();
    }
    if (checkpoints.empty()) {
        throw FormatError("config: no 'checkpoints' listed and no --checkpoint given");
    }

    RunDir run("kappa", out_dir, cfg);
    run.write("dataset.json", dataset_manifest(ds, cfg.at("dataset")).dump(2) + "\n");
    run.note("kappa_random_start", atk.random_start);

    std::string auroc_csv = "checkpoint,score,orientation,auroc\n";
    std::vector<double> pooled_loss_norm, pooled_kappa_norm;
    std::vector<std::uint8_t> pooled_corr;
    const bool has_both = ds.corrupted_count() > 0 && ds.corrupted_count() < ds.size();

    for (const std::string& ckpt_path : checkpoints) {
        Checkpoint ckpt = load_checkpoint(ckpt_path);
        if (ckpt.model.input_dim() != ds.feature_dim() ||
            ckpt.model.class_count() != static_cast<std::size_t>(ds.class_count)) {
            throw FormatError(ckpt_path + ": checkpoint shape " + std::to_string(ckpt.model.input_dim()) +
                              "->" + std::to_string(ckpt.model.class_count()) +
                              " incompatible with dataset " + std::to_string(ds.feature_dim()) + "->" +
                              std::to_string(ds.class_count));
        }
        const std::string tag = fs::path(ckpt_path).stem().string();
        std::vector<SampleRecord> table = kappa_loss_table(ckpt.model, ds, atk);
        run.write("table_" + tag + ".csv", sample_table_csv(table));

        std::vector<double> loss_norm(table.size()), kappa_norm(table.size()), loss(table.size()),
            kappa_vals(table.size());
        std::vector<std::uint8_t> corr(table.size());
        for (std::size_t i = 0; i < table.size(); ++i) {
            loss_norm[i] = table[i].loss_norm;
            kappa_norm[i] = table[i].kappa_norm;
            loss[i] = table[i].loss;
            kappa_vals[i] = table[i].kappa;
            corr[i] = table[i].corrupted;
        }
        run.write("hist_loss_" + tag + ".csv", histogram_csv(histogram64(loss_norm, corr)));
        run.write("hist_kappa_" + tag + ".csv", histogram_csv(histogram64(kappa_norm, corr)));
        pooled_loss_norm.insert(pooled_loss_norm.end(), loss_norm.begin(), loss_norm.end());
        pooled_kappa_norm.insert(pooled_kappa_norm.end(), kappa_norm.begin(), kappa_norm.end());
        pooled_corr.insert(pooled_corr.end(), corr.begin(), corr.end());

        if (has_both) {
            auroc_csv += tag + ",kappa,low_means_corrupted," +
                         format_f6(separability_auroc(kappa_vals, corr, Orientation::low_score_means_corrupted)) + "\n";
            auroc_csv += tag + ",kappa,high_means_corrupted," +
                         format_f6(separability_auroc(kappa_vals, corr, Orientation::high_score_means_corrupted)) + "\n";
            auroc_csv += tag + ",loss,low_means_corrupted," +
                         format_f6(separability_auroc(loss, corr, Orientation::low_score_means_corrupted)) + "\n";
            auroc_csv += tag + ",loss,high_means_corrupted," +
                         format_f6(separability_auroc(loss, corr, Orientation::high_score_means_corrupted)) + "\n";
        }
        run.write("ranking_" + tag + ".csv", ranking_csv(rank_typical_rare(table), table));
    }
    run.write("pooled_hist_loss.csv", histogram_csv(histogram64(pooled_loss_norm, pooled_corr)));
    run.write("pooled_hist_kappa.csv", histogram_csv(histogram64(pooled_kappa_norm, pooled_corr)));
    run.write("auroc.csv", auroc_csv);
    run.finalize();
    return 0;
}

// ---------------------------------------------------------------------------
// annotate: the four-annotator comparison over an adversarial-ratio sweep.

int cmd_annotate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override) {
    json cfg = load_config(config_path, seed_override);
    const std::uint64_t base_seed = cfg.at("seed").get<std::uint64_t>();

    NoisyDataset clean_ds =
        parse_dataset(require_field(cfg, "dataset", ""), "dataset", base_seed, "dataset");
    if (clean_ds.corrupted_count() > 0) {
        throw FormatError("config: 'dataset' must be clean; noise is configured under 'noise'");
    }
    NoisyDataset noisy_ds = inject_noise(
        clean_ds, parse_noise(require_field(cfg, "noise", ""), "noise", derive_seed(base_seed, "noise")));
    NoisyDataset u_ds =
        parse_dataset(require_field(cfg, "test_dataset", ""), "test_dataset", base_seed, "test-dataset");

    TrainConfig at_cfg = parse_train(require_field(cfg, "train", ""), "train", base_seed);
    if (at_cfg.mode != TrainMode::adversarial) {
        throw FormatError("config: 'train.mode' must be 'adversarial' for annotate");
    }
    TrainConfig st_cfg = at_cfg;
    st_cfg.mode = TrainMode::standard;
    st_cfg.attack.reset();

    const json& an = require_field(cfg, "annotator", "");
    AnnotatorConfig acfg;
    acfg.base = at_cfg;
    acfg.warmup_epochs = static_cast<int>(int_field(an, "warmup_epochs", "annotator"));
    acfg.geometry_threshold = static_cast<int>(int_field_or(an, "geometry_threshold", "annotator", 2));
    acfg.loss_fraction = num_field_or(an, "loss_fraction", "annotator", 0.2);
    try {
        acfg.validate();
    } catch (const std::exception& e) {
        throw FormatError(std::string("config: 'annotator': ") + e.what());
    }

    AttackConfig u_attack = parse_attack(require_field(cfg, "u_attack", ""), "u_attack",
                                         derive_seed(base_seed, "u-attack"), true);
    std::vector<double> ratios = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    if (cfg.contains("ratios")) ratios = cfg.at("ratios").get<std::vector<double>>();

    RunDir run("annotate", out_dir, cfg);
    run.write("dataset_train_clean.json", dataset_manifest(clean_ds, cfg.at("dataset")).dump(2) + "\n");
    run.write("dataset_train_noisy.json", dataset_manifest(noisy_ds, cfg.at("noise")).dump(2) + "\n");
    run.write("dataset_u.json", dataset_manifest(u_ds, cfg.at("test_dataset")).dump(2) + "\n");

    NoisyDataset no_test;

    // Four annotators: robust (noisy labels), plain AT (noisy labels),
    // plain AT (clean labels), plain ST (clean labels).
    Model robust = parse_model(cfg, clean_ds.feature_dim(), clean_ds.class_count, base_seed);
    AnnotatorRun robust_run = robust_annotator_train(robust, noisy_ds, acfg, u_ds);
    run.write("metrics_robust_noisy.csv", metrics_csv(robust_run.metrics));
    run.write("relabel_log.csv", relabel_log_csv(robust_run.relabel_log));

    Model at_noisy = parse_model(cfg, clean_ds.feature_dim(), clean_ds.class_count, base_seed);
    run.write("metrics_at_noisy.csv", metrics_csv(train(at_noisy, noisy_ds, at_cfg, u_ds)));

    Model at_clean = parse_model(cfg, clean_ds.feature_dim(), clean_ds.class_count, base_seed);
    run.write("metrics_at_clean.csv", metrics_csv(train(at_clean, clean_ds, at_cfg, u_ds)));

    Model st_clean = parse_model(cfg, clean_ds.feature_dim(), clean_ds.class_count, base_seed);
    run.write("metrics_st_clean.csv", metrics_csv(train(st_clean, clean_ds, st_cfg, u_ds)));

    const std::pair<std::string, const Model*> annotators[] = {
        {"robust_noisy", &robust}, {"at_noisy", &at_noisy}, {"at_clean", &at_clean}, {"st_clean", &st_clean}};

    std::string ratio_csv = "annotator,ratio,accuracy\n";
    for (const auto& [name, model] : annotators) {
        for (double ratio : ratios) {
            // Same U perturbation choice per ratio across annotators is not
            // meaningful (attacks are model-specific); seeds differ by name.
            AnnotateOutput out = annotate(
                *model, u_ds.features, ratio, u_attack, u_ds.truth,
                derive_seed(base_seed, "annotate." + name,
                            static_cast<std::uint64_t>(std::llround(ratio * 1000))));
            char tag[64];
            std::snprintf(tag, sizeof tag, "%s_ratio_%03d", name.c_str(),
                          static_cast<int>(std::llround(ratio * 100)));
            run.write(std::string("annotation_") + tag + ".csv",
                      annotation_report_csv(out, u_ds.truth));
            run.write(std::string("confidence_") + tag + ".csv",
                      confidence_report_csv(confidence_bins(out.results, u_ds.truth, u_attack.max_steps)));
            ratio_csv += name;
            ratio_csv += ',' + format_f6(ratio);
            ratio_csv += ',' + format_f6(out.accuracy.value_or(0.0));
            ratio_csv += '\n';
        }
    }
    run.write("ratio_accuracy.csv", ratio_csv);
    run.note("u_attack_alpha", u_attack.alpha);
    run.finalize();
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Adversarial training with noisy labels: desk-scale laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint;
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* sub, bool with_checkpoint) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output run directory")->required();
        sub->add_option("--seed", seed, "override the config seed");
        if (with_checkpoint) sub->add_option("--checkpoint", checkpoint, "checkpoint file");
    };

    CLI::App* synth = app.add_subcommand("synth", "2-D synthetic smoothing experiment");
    add_common(synth, false);
    CLI::App* train_cmd = app.add_subcommand("train", "train a classifier and emit metrics");
    add_common(train_cmd, false);
    CLI::App* kappa = app.add_subcommand("kappa", "per-sample geometry/loss analytics");
    add_common(kappa, true);
    CLI::App* annotate_cmd = app.add_subcommand("annotate", "four-annotator comparison");
    add_common(annotate_cmd, false);

    std::vector<std::string> argv_copy(args);
    std::vector<char*> argv;
    argv.push_back(const_cast<char*>("atnl"));
    for (auto& a : argv_copy) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(config_path, out_dir, seed);
        if (train_cmd->parsed()) return cmd_train(config_path, out_dir, seed);
        if (kappa->parsed()) return cmd_kappa(config_path, out_dir, seed, checkpoint);
        if (annotate_cmd->parsed()) return cmd_annotate(config_path, out_dir, seed);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace atnl::cli
