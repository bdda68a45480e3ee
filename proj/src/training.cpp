#include "upseg/training.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "upseg/complexity.hpp"
#include "upseg/errors.hpp"
#include "upseg/loss.hpp"
#include "upseg/rng.hpp"
#include "upseg/tensor_file.hpp"

namespace upseg {

ModelGraph build_model(const RunConfig& cfg) {
    auto base = build_unet(cfg.backbone, cfg.optimizer.seed);
    return build_upscale_stack(base, cfg.stack, cfg.optimizer.seed);
}

Dataset load_or_generate(const RunConfig& cfg) {
    if (cfg.data_path.empty()) return generate(cfg.data);
    Dataset d = load_dataset(cfg.data_path);
    if (d.input_res() != cfg.data.input_res || d.gt_res() != cfg.data.gt_res ||
        d.num_classes != cfg.backbone.num_classes) {
        throw ConfigError("dataset " + cfg.data_path + " does not match data.input_res / data.gt_res / model.num_classes");
    }
    return d;
}

void save_checkpoint(const std::filesystem::path& path, const ModelGraph& model) {
    std::vector<TensorRecord> records;
    for (const auto& p : model.parameters()) records.push_back(to_record(p.name, p.tensor));
    write_tensor_file(path, records);
}

void load_checkpoint(const std::filesystem::path& path, ModelGraph& model) {
    std::vector<TensorRecord> records;
    try {
        records = read_tensor_file(path);
    } catch (const FormatError& e) {
        throw MismatchError("checkpoint " + path.string() + ": " + e.what());
    }
    const auto& params = model.parameters();
    if (records.size() != params.size()) {
        throw MismatchError("checkpoint holds " + std::to_string(records.size()) +
                            " tensors, model has " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& rec = records[i];
        Tensor stored = to_tensor(rec);
        Tensor target = params[i].tensor;
        if (rec.name != params[i].name || stored.shape() != target.shape()) {
            throw MismatchError("checkpoint tensor '" + rec.name + "' " +
                                shape_to_string(stored.shape()) + " does not match model parameter '" +
                                params[i].name + "' " + shape_to_string(target.shape()));
        }
        auto dst = target.mutable_data();
        std::copy(stored.data().begin(), stored.data().end(), dst.begin());
    }
}

Mask predict(const ModelGraph& model, const Tensor& images, std::int64_t gt_res, int batch_size) {
    const std::int64_t n = images.dim(0);
    Mask out(n, gt_res, gt_res);
    const std::int64_t per = gt_res * gt_res;
    Dataset holder;
    holder.images = images;
    for (std::int64_t start = 0; start < n; start += batch_size) {
        std::vector<std::int64_t> idx;
        for (std::int64_t i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
        auto taps = forward_all_taps(model, holder.image_batch(idx).detach());
        Mask pred = upscale_prediction(taps.back(), gt_res, gt_res);
        std::copy(pred.labels.begin(), pred.labels.end(), out.labels.begin() + start * per);
    }
    return out;
}

EvaluationSummary evaluate_model(const ModelGraph& model, const Dataset& data, int batch_size) {
    Mask pred = predict(model, data.images, data.gt_res(), batch_size);
    return evaluate(pred, data.masks, label_count(data.num_classes));
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream os;
    os << "epoch,train_loss,val_dice,val_jaccard\n";
    os << std::setprecision(10);
    for (const auto& r : history) {
        os << r.epoch << ',' << r.train_loss << ',' << r.val_dice << ',' << r.val_jaccard << '\n';
    }
    return os.str();
}

Trainer::Trainer(RunConfig cfg, Dataset train, Dataset val)
    : cfg_(std::move(cfg)), train_(std::move(train)), val_(std::move(val)) {
    cfg_.validate();
    if (train_.gt_res() % cfg_.output_res() != 0 || train_.input_res() != cfg_.data.input_res) {
        throw ConfigError("training data resolution does not match the model configuration");
    }
    model_ = build_model(cfg_);
    params_ = model_.parameter_tensors();
    if (cfg_.optimizer.kind == "adam") adam_ = std::make_unique<Adam>(params_, cfg_.optimizer.lr);
}

std::vector<std::vector<std::int64_t>> Trainer::epoch_batches(int epoch) const {
    std::vector<std::int64_t> order(static_cast<std::size_t>(train_.size()));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg_.optimizer.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }
    std::vector<std::vector<std::int64_t>> batches;
    const auto bs = static_cast<std::size_t>(cfg_.optimizer.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
        const auto end = std::min(order.size(), start + bs);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

Tensor Trainer::batch_loss(const std::vector<std::int64_t>& indices) const {
    auto taps = forward_all_taps(model_, train_.image_batch(indices));
    return l_sum(taps, train_.mask_batch(indices), cfg_.loss);
}

double Trainer::train_step(const std::vector<std::int64_t>& indices) {
    for (auto& p : params_) p.zero_grad();
    Tensor loss = batch_loss(indices);
    const double value = loss.item();
    if (!std::isfinite(value)) throw DivergenceError("training diverged: non-finite loss");
    backward(loss);
    if (adam_) adam_->step();
    else sgd_step(params_, cfg_.optimizer.lr);
    return value;
}

double Trainer::train_epoch(int epoch) {
    double total = 0.0;
    const auto batches = epoch_batches(epoch);
    for (const auto& batch : batches) total += train_step(batch);
    return total / static_cast<double>(batches.size());
}

EvaluationSummary Trainer::validate() const { return evaluate_model(model_, val_); }

TrainResult Trainer::run(const std::function<void(const EpochRecord&)>& on_epoch) {
    TrainResult result;
    result.best_val_jaccard = -1.0;
    std::vector<std::vector<double>> best;
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg_.optimizer.max_epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_epoch(epoch);
        const auto summary = validate();
        rec.val_dice = summary.macro_dice;
        rec.val_jaccard = summary.macro_jaccard;
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val_jaccard > result.best_val_jaccard + cfg_.optimizer.min_delta || epoch == 1) {
            result.best_val_jaccard = rec.val_jaccard;
            result.best_epoch = epoch;
            best.clear();
            for (const auto& p : params_) best.emplace_back(p.data().begin(), p.data().end());
            since_best = 0;
        } else if (++since_best >= cfg_.optimizer.patience) {
            result.early_stopped = true;
            break;
        }
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto dst = params_[i].mutable_data();
        std::copy(best[i].begin(), best[i].end(), dst.begin());
    }
    return result;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "resolution,gmacs,params,mean_dice,mean_jaccard,variant\n";
    os << std::setprecision(10);
    for (const auto& r : rows) {
        os << r.resolution << ',' << r.gmacs << ',' << r.params << ',' << r.mean_dice << ','
           << r.mean_jaccard << ',' << r.variant << '\n';
    }
    return os.str();
}

RunConfig sweep_variant(const RunConfig& cfg, int resolution, bool extended) {
    RunConfig run = cfg;
    run.data.input_res = resolution;
    run.data_path.clear();
    int stages = 0;
    if (extended) {
        if (resolution < 1 || cfg.data.gt_res % resolution != 0 ||
            !std::has_single_bit(static_cast<unsigned>(cfg.data.gt_res / resolution))) {
            throw ConfigError("sweep resolution " + std::to_string(resolution) +
                              " does not reach data.gt_res by doublings");
        }
        stages = std::countr_zero(static_cast<unsigned>(cfg.data.gt_res / resolution));
    }
    run.stack.num_stages = stages;
    run.loss.num_stages = stages;
    if (run.loss.stage_weights.size() != static_cast<std::size_t>(stages) + 1) {
        run.loss.stage_weights.clear();
    }
    run.validate();
    return run;
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::vector<int>& resolutions,
                                int threads) {
    if (resolutions.empty()) throw ConfigError("sweep needs at least one resolution");
    std::vector<RunConfig> runs;
    for (int r : resolutions) {
        runs.push_back(sweep_variant(cfg, r, false));
        runs.push_back(sweep_variant(cfg, r, true));
    }
    std::vector<SweepRow> rows(runs.size());
    auto execute = [&](std::size_t i) {
        const RunConfig& run = runs[i];
        auto [train, val] = split(generate(run.data), run.val_fraction);
        Trainer trainer(run, std::move(train), std::move(val));
        trainer.run();
        const auto summary = trainer.validate();
        SweepRow row;
        row.resolution = run.data.input_res;
        row.gmacs = profile(trainer.model(), run.data.input_res, run.data.input_res).gmacs();
        row.params = count_parameters(trainer.model());
        row.mean_dice = summary.macro_dice;
        row.mean_jaccard = summary.macro_jaccard;
        row.variant = i % 2 == 0 ? "baseline" : "extended";
        rows[i] = row;
    };

    if (threads <= 1) {
        for (std::size_t i = 0; i < runs.size(); ++i) execute(i);
        return rows;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), runs.size());
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < runs.size(); i = next++) {
                try {
                    execute(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return rows;
}

}  // namespace upseg
