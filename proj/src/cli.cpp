#include "tend/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tend/checkpoint.hpp"
#include "tend/config.hpp"
#include "tend/data.hpp"
#include "tend/distortions.hpp"
#include "tend/errors.hpp"
#include "tend/evaluation.hpp"
#include "tend/model.hpp"
#include "tend/plot.hpp"
#include "tend/scoring.hpp"
#include "tend/training.hpp"
#include "tend/util.hpp"

namespace fs = std::filesystem;

namespace tend::cli {

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "tend_out";
    bool seed_set = false;
    uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOpts* opts, bool config_required) {
    auto* c = cmd->add_option("--config", opts->config_path, "run configuration file");
    if (config_required) c->required();
    cmd->add_option("--out-dir", opts->out_dir, "directory for artifacts");
    cmd->add_option("--seed", opts->seed, "override the config seed")
        ->each([opts](const std::string&) { opts->seed_set = true; });
}

RunConfig load_config(const CommonOpts& opts) {
    RunConfig cfg =
        opts.config_path.empty() ? RunConfig{} : load_run_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    cfg.validate();
    return cfg;
}

// eval and plot work from score files alone; a config is optional context.
RunConfig load_config_optional(const CommonOpts& opts) {
    if (opts.config_path.empty()) {
        RunConfig cfg;
        if (opts.seed_set) cfg.seed = opts.seed;
        return cfg;
    }
    return load_config(opts);
}

Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.synthetic())
        return make_synthetic(cfg.synthetic_params(), cfg.arch.input_side, cfg.arch.channels);
    return ingest(cfg.dataset_spec());
}

std::string out_path(const CommonOpts& opts, const std::string& name) {
    return (fs::path(opts.out_dir) / name).string();
}

// The manifest is written last; every artifact listed must already exist.
void write_manifest(const CommonOpts& opts, const std::string& command,
                    const RunConfig& cfg, const std::vector<std::pair<std::string,
                    std::string>>& artifacts, double wall_seconds) {
    std::ostringstream os;
    os << "tool_version: " << kToolVersion << '\n';
    os << "command: " << command << '\n';
    os << "wall_clock_seconds: " << format_double(wall_seconds) << '\n';
    os << "seed: " << cfg.seed << '\n';
    os << "data_seed: " << cfg.data_seed() << '\n';
    os << "init_seed: " << cfg.init_seed() << '\n';
    os << "train_seed: " << cfg.train_seed() << '\n';
    os << "artifacts:\n";
    for (const auto& [name, path] : artifacts) {
        if (!fs::exists(path)) throw DataError("manifest artifact missing: " + path);
        os << "  " << name << ": " << fs::absolute(path).string() << '\n';
    }
    os << "config:\n";
    std::istringstream snap(cfg.to_text());
    std::string line;
    while (std::getline(snap, line)) os << "  " << line << '\n';
    atomic_write_file(out_path(opts, "manifest_" + command + ".txt"), os.str());
}

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

int cmd_train_ae(const CommonOpts& opts) {
    const Timer timer;
    const RunConfig cfg = load_config(opts);
    const Dataset ds = load_dataset(cfg);
    ensure_dir(opts.out_dir);

    TendModel model(cfg.arch, cfg.init_seed());
    const auto log = train_stage1(model, ds.train_id, cfg.stage1_config());

    const std::string loss_path = out_path(opts, "stage1_loss.csv");
    write_epoch_log_csv(loss_path, log, 1);

    CheckpointMeta meta;
    meta.stage = Stage::STAGE1;
    meta.init_seed = cfg.init_seed();
    meta.train_seed = cfg.train_seed();
    const std::string ckpt_path = out_path(opts, "stage1.ckpt");
    save_checkpoint(ckpt_path, model, meta);

    const std::string data_manifest = out_path(opts, "dataset_manifest.csv");
    write_dataset_manifest(data_manifest, ds.manifest);
    if (ds.skipped > 0)
        std::cerr << "warning: skipped " << ds.skipped << " unreadable files\n";

    write_manifest(opts, "train-ae", cfg,
                   {{"checkpoint", ckpt_path},
                    {"loss_csv", loss_path},
                    {"dataset_manifest", data_manifest}},
                   timer.seconds());
    std::cout << "stage-1 checkpoint: " << ckpt_path << '\n';
    return 0;
}

int cmd_train_head(const CommonOpts& opts, const std::string& stage1_path) {
    const Timer timer;
    const RunConfig cfg = load_config(opts);
    const std::string in_ckpt =
        stage1_path.empty() ? out_path(opts, "stage1.ckpt") : stage1_path;
    LoadedCheckpoint loaded = load_checkpoint(in_ckpt);
    if (!(loaded.arch == cfg.arch))
        throw ConfigError("checkpoint architecture does not match the config");

    const Dataset ds = load_dataset(cfg);
    ensure_dir(opts.out_dir);

    const TrainConfig tc = cfg.stage2_config();
    const Stage2Result result =
        train_stage2(*loaded.model, ds.train_id, tc, loaded.meta.stage,
                     cfg.supervised ? &ds.ood_train : nullptr);

    const std::string loss_path = out_path(opts, "stage2_loss.csv");
    write_epoch_log_csv(loss_path, result.log, 2);

    CheckpointMeta meta;
    meta.stage = Stage::STAGE2;
    meta.init_seed = loaded.meta.init_seed;
    meta.train_seed = cfg.train_seed();
    meta.margin_r = tc.margin_r;
    meta.margin_reduction = margin_reduction_name(tc.margin_reduction);
    meta.center = result.center.O;
    meta.center_epoch = result.center.computed_at_epoch;
    const std::string ckpt_path = out_path(opts, "stage2.ckpt");
    save_checkpoint(ckpt_path, *loaded.model, meta);

    write_manifest(opts, "train-head", cfg,
                   {{"checkpoint", ckpt_path}, {"loss_csv", loss_path}}, timer.seconds());
    std::cout << "stage-2 checkpoint: " << ckpt_path << '\n';
    return 0;
}

int cmd_score(const CommonOpts& opts, const std::string& ckpt_path, std::string mode_name,
              double lambda, bool lambda_set, bool with_val) {
    const Timer timer;
    const RunConfig cfg = load_config(opts);
    const std::string in_ckpt =
        ckpt_path.empty() ? out_path(opts, "stage2.ckpt") : ckpt_path;
    LoadedCheckpoint loaded = load_checkpoint(in_ckpt);

    const ScoreMode mode =
        mode_name.empty() ? cfg.mode : score_mode_from_name(mode_name);
    const double lam = lambda_set ? lambda : cfg.lambda;

    Center center;
    center.O = loaded.meta.center;
    center.computed_at_epoch = loaded.meta.center_epoch;

    const Dataset ds = load_dataset(cfg);
    ensure_dir(opts.out_dir);

    const auto test_scores = score_batch(*loaded.model, ds.test, center,
                                         loaded.meta.margin_r, lam, mode, loaded.meta.stage);
    const std::string scores_path = out_path(opts, "scores.csv");
    write_scores_csv(scores_path, test_scores);

    std::vector<std::pair<std::string, std::string>> artifacts = {{"scores", scores_path}};
    if (with_val) {
        std::vector<ImageSample> id_test;
        for (const auto& s : ds.test)
            if (s.label == Label::ID) id_test.push_back(s);
        std::vector<ImageSample> val;
        for (const DistortionKind kind :
             {DistortionKind::RANDOM_CUT, DistortionKind::RANDOM_CROP_RESIZE,
              DistortionKind::NOISE, DistortionKind::GAUSSIAN_BLUR}) {
            auto part = generate_validation_set(id_test, kind);
            std::move(part.begin(), part.end(), std::back_inserter(val));
        }
        const auto val_scores = score_batch(*loaded.model, val, center,
                                            loaded.meta.margin_r, lam, mode,
                                            loaded.meta.stage);
        const std::string val_path = out_path(opts, "val_scores.csv");
        write_scores_csv(val_path, val_scores);
        artifacts.emplace_back("val_scores", val_path);
    }

    write_manifest(opts, "score", cfg, artifacts, timer.seconds());
    std::cout << "scores: " << scores_path << '\n';
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& scores_path,
             const std::string& val_scores_path) {
    const Timer timer;
    const RunConfig cfg = load_config_optional(opts);
    const std::string in_scores =
        scores_path.empty() ? out_path(opts, "scores.csv") : scores_path;
    const auto test_scores = read_scores_csv(in_scores);

    std::vector<ScoreRecord> val_scores;
    const bool with_val = !val_scores_path.empty();
    if (with_val) val_scores = read_scores_csv(val_scores_path);

    const EvalReport report = evaluate(test_scores, with_val ? &val_scores : nullptr);
    ensure_dir(opts.out_dir);

    const std::string report_path = out_path(opts, "report.txt");
    atomic_write_file(report_path, report.to_text());
    const std::string metrics_path = out_path(opts, "metrics.csv");
    atomic_write_file(metrics_path, report.to_csv());

    write_manifest(opts, "eval", cfg,
                   {{"report", report_path}, {"metrics", metrics_path}}, timer.seconds());
    std::cout << report.to_text();
    return 0;
}

int cmd_plot(const CommonOpts& opts, const std::string& scores_path, double margin_r,
             bool margin_set, double threshold, bool threshold_set) {
    const Timer timer;
    const RunConfig cfg = load_config_optional(opts);
    const std::string in_scores =
        scores_path.empty() ? out_path(opts, "scores.csv") : scores_path;
    const auto records = read_scores_csv(in_scores);

    const double r = margin_set ? margin_r : cfg.margin_r;
    double t = threshold;
    if (!threshold_set) {
        // Prefer the tuned threshold; fall back to calling everything ID
        // when the labels cannot support a threshold search.
        long long n_id = 0, n_ood = 0, n_other = 0;
        double max_s = 0.0;
        for (const auto& rec : records) {
            if (rec.label == Label::ID)
                ++n_id;
            else if (rec.label == Label::OOD)
                ++n_ood;
            else
                ++n_other;
            max_s = std::max(max_s, rec.S);
        }
        t = n_id > 0 && n_ood > 0 && n_other == 0
                ? gmean_threshold(to_labeled(records)).threshold
                : max_s + 1.0;
    }

    ensure_dir(opts.out_dir);
    const std::string truth_path = out_path(opts, "plot_truth.png");
    const std::string pred_path = out_path(opts, "plot_pred.png");
    write_score_plots(truth_path, pred_path, records, r, t);

    write_manifest(opts, "plot", cfg,
                   {{"plot_truth", truth_path}, {"plot_pred", pred_path}}, timer.seconds());
    std::cout << "plots: " << truth_path << ", " << pred_path << '\n';
    return 0;
}

int cmd_distort(const std::string& input, const std::string& output,
                const std::string& kind_str, uint64_t seed, int channels) {
    const DistortionKind kind = kind_from_name(kind_str);
    ImageSample sample;
    sample.image = load_image(input, channels);
    sample.label = Label::ID;
    sample.source_id = input;
    const ImageSample out = distort(sample, DistortionSpec::default_for(kind, seed));
    ensure_parent_dir(output);
    save_image(output, out.image);
    std::cout << "distorted: " << output << '\n';
    return 0;
}

int cmd_make_synthetic(const CommonOpts& opts) {
    const Timer timer;
    const RunConfig cfg = load_config(opts);
    const Dataset ds = make_synthetic(cfg.synthetic_params(), cfg.arch.input_side,
                                      cfg.arch.channels);
    const fs::path root = fs::path(opts.out_dir) / "dataset";
    fs::create_directories(root / "id");
    fs::create_directories(root / "ood");

    std::vector<ManifestRow> rows;
    const auto dump = [&](const std::vector<ImageSample>& part) {
        for (const auto& s : part) {
            // source_id "synthetic/id_0003" becomes dataset/id/id_0003.png.
            const std::string stem = s.source_id.substr(s.source_id.rfind('/') + 1);
            const std::string cls = s.label == Label::ID ? "id" : "ood";
            const fs::path path = root / cls / (stem + ".png");
            save_image(path.string(), s.image);
            rows.push_back({s.source_id, path.string(), cls, s.label, s.split});
        }
    };
    dump(ds.train_id);
    dump(ds.test);

    const std::string manifest_path = (root / "manifest.csv").string();
    write_dataset_manifest(manifest_path, rows);
    write_manifest(opts, "make-synthetic", cfg, {{"dataset_manifest", manifest_path}},
                   timer.seconds());
    std::cout << "dataset: " << root.string() << '\n';
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"two-stage novelty detector"};
    app.require_subcommand(1);

    CommonOpts train_ae_opts, train_head_opts, score_opts, eval_opts, plot_opts, synth_opts;

    auto* train_ae = app.add_subcommand("train-ae", "fit the autoencoder on ID data");
    add_common(train_ae, &train_ae_opts, true);

    auto* train_head = app.add_subcommand("train-head",
                                          "train the classifier and margin head");
    add_common(train_head, &train_head_opts, true);
    std::string stage1_path;
    train_head->add_option("--stage1", stage1_path, "stage-1 checkpoint path");

    auto* score_cmd = app.add_subcommand("score", "score the test mixture");
    add_common(score_cmd, &score_opts, true);
    std::string score_ckpt, score_mode;
    double score_lambda = 0.5;
    bool lambda_set = false, with_val = false;
    score_cmd->add_option("--ckpt", score_ckpt, "checkpoint path");
    score_cmd->add_option("--mode", score_mode, "tend|margin_only|classifier_only|ae_recon");
    score_cmd->add_option("--lambda", score_lambda, "blend weight")
        ->each([&](const std::string&) { lambda_set = true; });
    score_cmd->add_flag("--with-val", with_val, "also score generated validation sets");

    auto* eval_cmd = app.add_subcommand("eval", "metrics from a scores file");
    add_common(eval_cmd, &eval_opts, false);
    std::string eval_scores, eval_val_scores;
    eval_cmd->add_option("--scores", eval_scores, "scores csv");
    eval_cmd->add_option("--val-scores", eval_val_scores, "validation scores csv");

    auto* plot_cmd = app.add_subcommand("plot", "render score geometry panels");
    add_common(plot_cmd, &plot_opts, false);
    std::string plot_scores;
    double plot_r = 250.0, plot_t = 0.0;
    bool plot_r_set = false, plot_t_set = false;
    plot_cmd->add_option("--scores", plot_scores, "scores csv");
    plot_cmd->add_option("--margin-r", plot_r, "margin R for the circle")
        ->each([&](const std::string&) { plot_r_set = true; });
    plot_cmd->add_option("--threshold", plot_t, "prediction threshold")
        ->each([&](const std::string&) { plot_t_set = true; });

    auto* distort_cmd = app.add_subcommand("distort", "apply one distortion to an image");
    std::string d_input, d_output, d_kind;
    uint64_t d_seed = 0;
    int d_channels = 3;
    distort_cmd->add_option("--input", d_input, "image file")->required();
    distort_cmd->add_option("--output", d_output, "output file")->required();
    distort_cmd->add_option("--kind", d_kind, "distortion name")->required();
    distort_cmd->add_option("--seed", d_seed, "seed for stochastic kinds");
    distort_cmd->add_option("--channels", d_channels, "1 or 3");

    auto* synth_cmd = app.add_subcommand("make-synthetic", "materialize a synthetic dataset");
    add_common(synth_cmd, &synth_opts, true);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
        if (train_ae->parsed()) return cmd_train_ae(train_ae_opts);
        if (train_head->parsed()) return cmd_train_head(train_head_opts, stage1_path);
        if (score_cmd->parsed())
            return cmd_score(score_opts, score_ckpt, score_mode, score_lambda, lambda_set,
                             with_val);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts, eval_scores, eval_val_scores);
        if (plot_cmd->parsed())
            return cmd_plot(plot_opts, plot_scores, plot_r, plot_r_set, plot_t, plot_t_set);
        if (distort_cmd->parsed())
            return cmd_distort(d_input, d_output, d_kind, d_seed, d_channels);
        if (synth_cmd->parsed()) return cmd_make_synthetic(synth_opts);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ParamError& e) {
        std::cerr << "parameter error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const MetricError& e) {
        std::cerr << "metric error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace tend::cli
