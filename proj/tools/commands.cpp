#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "upseg/errors.hpp"
#include "upseg/tensor_file.hpp"

namespace upseg::cli {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

void ensure_out_dir(const Options& opts) {
    std::error_code ec;
    std::filesystem::create_directories(opts.out, ec);
    if (ec) throw IoError("cannot create output directory " + opts.out.string() + ": " + ec.message());
}

int worker_threads() {
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* cap = std::getenv("UPSEG_THREADS")) {
        const int limit = std::atoi(cap);
        if (limit >= 1) threads = std::min(threads, limit);
    }
    return threads;
}

}  // namespace

RunConfig load_config(const Options& opts) {
    if (opts.config.empty()) throw ConfigError("--config is required");
    RunConfig cfg = RunConfig::load(opts.config);
    if (opts.seed) cfg.optimizer.seed = *opts.seed;
    return cfg;
}

TrainResult cmd_train(const Options& opts, std::ostream& log) {
    RunConfig cfg = load_config(opts);
    ensure_out_dir(opts);
    auto [train, val] = split(load_or_generate(cfg), cfg.val_fraction);
    Trainer trainer(cfg, std::move(train), std::move(val));
    auto result = trainer.run([&](const EpochRecord& r) {
        if (!opts.quiet) {
            log << "epoch " << r.epoch << " loss " << r.train_loss << " val_dice " << r.val_dice
                << " val_jaccard " << r.val_jaccard << '\n';
        }
    });
    save_checkpoint(opts.out / "checkpoint.utsr", trainer.model());
    write_text(opts.out / "train_log.csv", history_csv(result.history));
    if (!opts.quiet) {
        log << "best epoch " << result.best_epoch << " val_jaccard " << result.best_val_jaccard
            << (result.early_stopped ? " (early stop)" : "") << '\n';
    }
    return result;
}

std::string metrics_csv(const EvaluationSummary& s) {
    std::ostringstream os;
    os << "images,macro_dice,macro_jaccard,pooled_dice,pooled_jaccard";
    for (std::size_t k = 0; k < s.pooled.dice.size(); ++k) os << ",dice_" << k << ",jaccard_" << k;
    os << '\n' << std::setprecision(10);
    os << s.images << ',' << s.macro_dice << ',' << s.macro_jaccard << ',' << s.pooled.mean_dice
       << ',' << s.pooled.mean_jaccard;
    for (std::size_t k = 0; k < s.pooled.dice.size(); ++k) {
        os << ',' << s.pooled.dice[k] << ',' << s.pooled.jaccard[k];
    }
    os << '\n';
    return os.str();
}

EvaluationSummary cmd_eval(const Options& opts, std::ostream& log) {
    RunConfig cfg = load_config(opts);
    ensure_out_dir(opts);
    Dataset data = opts.dataset.empty() ? split(load_or_generate(cfg), cfg.val_fraction).second
                                        : load_dataset(opts.dataset);
    const int labels = label_count(data.num_classes);
    EvaluationSummary summary;
    if (!opts.predictions.empty()) {
        Mask predicted = to_mask(find_record(read_tensor_file(opts.predictions), "masks"));
        if (predicted.height != data.gt_res()) {
            throw MismatchError("prediction masks are not at ground-truth resolution");
        }
        summary = evaluate(predicted, data.masks, labels);
    } else {
        ModelGraph model = build_model(cfg);
        load_checkpoint(opts.checkpoint.empty() ? opts.out / "checkpoint.utsr" : opts.checkpoint, model);
        if (data.input_res() != cfg.data.input_res) {
            throw MismatchError("dataset input resolution differs from the model configuration");
        }
        summary = evaluate_model(model, data);
    }
    const auto report = cfg.report_path.empty() ? opts.out / "metrics.csv"
                                                : std::filesystem::path(cfg.report_path);
    write_text(report, metrics_csv(summary));
    if (!opts.quiet) {
        log << "macro dice " << summary.macro_dice << " jaccard " << summary.macro_jaccard
            << " | pooled dice " << summary.pooled.mean_dice << " jaccard "
            << summary.pooled.mean_jaccard << '\n';
    }
    return summary;
}

ComplexityReport cmd_profile(const Options& opts, std::ostream& out) {
    RunConfig cfg = load_config(opts);
    ensure_out_dir(opts);
    ModelGraph model = build_model(cfg);
    auto report = profile(model, cfg.data.input_res, cfg.data.input_res);
    write_text(opts.out / "profile.csv", report.to_csv());
    if (!opts.quiet) out << report.to_table();
    return report;
}

std::vector<SweepRow> cmd_sweep(const Options& opts, std::ostream& log) {
    RunConfig cfg = load_config(opts);
    ensure_out_dir(opts);
    std::vector<int> resolutions = opts.resolutions;
    if (resolutions.empty()) resolutions = {cfg.data.input_res};
    const int threads = opts.parallel ? worker_threads() : 1;
    auto rows = run_sweep(cfg, resolutions, threads);
    write_text(opts.out / "sweep.csv", sweep_csv(rows));
    if (!opts.quiet) log << sweep_csv(rows);
    return rows;
}

void cmd_generate(const Options& opts, std::ostream& log) {
    RunConfig cfg = load_config(opts);
    ensure_out_dir(opts);
    auto path = opts.dataset.empty() ? opts.out / "dataset.utsr" : opts.dataset;
    save_dataset(path, generate(cfg.data));
    if (!opts.quiet) log << "wrote " << cfg.data.num_samples << " samples to " << path.string() << '\n';
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
    if (dynamic_cast<const DivergenceError*>(&e)) return kDiverged;
    if (dynamic_cast<const MismatchError*>(&e)) return kMismatch;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kIoError;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kIoError;
    return kFailure;
}

int run(int argc, char** argv) {
    CLI::App app{"upseg: U-Net with up-scaling decoder stages for low-resolution inputs"};
    app.require_subcommand(1);
    Options opts;
    std::string resolutions;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "flat section.key = value config file")->required();
        sub->add_option("--out", opts.out, "output directory");
        sub->add_option("--seed", opts.seed, "override optimizer.seed");
        sub->add_flag("--quiet", opts.quiet, "suppress progress output");
    };
    auto* train = app.add_subcommand("train", "train a model, write checkpoint.utsr and train_log.csv");
    common(train);
    auto* eval = app.add_subcommand("eval", "score a checkpoint at ground-truth resolution");
    common(eval);
    eval->add_option("--checkpoint", opts.checkpoint, "checkpoint (default <out>/checkpoint.utsr)");
    eval->add_option("--dataset", opts.dataset, "UTSR dataset (default: validation split of the config)");
    eval->add_option("--predictions", opts.predictions, "UTSR file with a 'masks' record to score directly");
    auto* prof = app.add_subcommand("profile", "parameter / MAC / activation-memory report");
    common(prof);
    auto* sweep = app.add_subcommand("sweep", "baseline vs extended trade-off over input resolutions");
    common(sweep);
    sweep->add_option("--resolutions", resolutions, "comma-separated input resolutions, e.g. 16,32,64");
    sweep->add_flag("--parallel", opts.parallel, "run sub-runs concurrently (UPSEG_THREADS caps workers)");
    auto* gen = app.add_subcommand("generate", "write the configured synthetic dataset as UTSR");
    common(gen);
    gen->add_option("--dataset", opts.dataset, "output path (default <out>/dataset.utsr)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (!resolutions.empty()) {
            std::stringstream ss(resolutions);
            std::string item;
            while (std::getline(ss, item, ',')) {
                std::size_t used = 0;
                int r = 0;
                try {
                    r = std::stoi(item, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != item.size() || r < 1) throw ConfigError("invalid resolution '" + item + "'");
                opts.resolutions.push_back(r);
            }
        }
        if (*train) cmd_train(opts, std::cerr);
        else if (*eval) cmd_eval(opts, std::cerr);
        else if (*prof) cmd_profile(opts, std::cout);
        else if (*sweep) cmd_sweep(opts, std::cout);
        else if (*gen) cmd_generate(opts, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kOk;
}

}  // namespace upseg::cli
