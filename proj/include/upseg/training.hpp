#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "upseg/config.hpp"
#include "upseg/data.hpp"
#include "upseg/graph.hpp"
#include "upseg/metrics.hpp"
#include "upseg/optim.hpp"

namespace upseg {

/// Backbone seeded from optimizer.seed with the configured stack appended
/// (a plain clone of the backbone when model.upscale_stages = 0).
ModelGraph build_model(const RunConfig& cfg);

/// Generated from cfg.data, or loaded from cfg.data_path when set.
Dataset load_or_generate(const RunConfig& cfg);

void save_checkpoint(const std::filesystem::path& path, const ModelGraph& model);
/// Copies stored values into `model`; MismatchError if names or shapes differ.
void load_checkpoint(const std::filesystem::path& path, ModelGraph& model);

/// Final-tap predictions stretched to gt_res, in batches.
Mask predict(const ModelGraph& model, const Tensor& images, std::int64_t gt_res,
             int batch_size = 16);
EvaluationSummary evaluate_model(const ModelGraph& model, const Dataset& data, int batch_size = 16);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_dice = 0.0;
    double val_jaccard = 0.0;
};

/// `epoch,train_loss,val_dice,val_jaccard` with a header row.
std::string history_csv(const std::vector<EpochRecord>& history);

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_jaccard = 0.0;
    bool early_stopped = false;
};

/// Minibatch training with the multi-scale loss and early stopping on the
/// validation mean Jaccard (macro over images).
class Trainer {
public:
    Trainer(RunConfig cfg, Dataset train, Dataset val);

    /// Shuffled sample order for a 1-based epoch, cut into batches.
    std::vector<std::vector<std::int64_t>> epoch_batches(int epoch) const;
    /// l_sum of the current model on the given training samples (graph kept).
    Tensor batch_loss(const std::vector<std::int64_t>& indices) const;
    /// One optimizer update; returns the loss value before the update.
    double train_step(const std::vector<std::int64_t>& indices);
    /// Mean batch loss over the epoch.
    double train_epoch(int epoch);
    EvaluationSummary validate() const;

    /// Runs to max_epochs or early stop, then restores the best weights.
    TrainResult run(const std::function<void(const EpochRecord&)>& on_epoch = {});

    const ModelGraph& model() const { return model_; }
    ModelGraph& model() { return model_; }
    const RunConfig& config() const { return cfg_; }

private:
    RunConfig cfg_;
    Dataset train_;
    Dataset val_;
    ModelGraph model_;
    std::vector<Tensor> params_;
    std::unique_ptr<Adam> adam_;
};

struct SweepRow {
    int resolution = 0;
    double gmacs = 0.0;
    std::int64_t params = 0;
    double mean_dice = 0.0;
    double mean_jaccard = 0.0;
    std::string variant;  // "baseline" or "extended"
};

/// `resolution,gmacs,params,mean_dice,mean_jaccard,variant`.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// For each input resolution trains the backbone alone (ground truth shrunk to
/// the input) and with enough up-scaling stages to reach data.gt_res. Rows are
/// ordered by resolution, baseline first. `threads` > 1 runs sub-runs
/// concurrently; results are identical either way.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::vector<int>& resolutions,
                                int threads = 1);

/// Config for one sweep sub-run.
RunConfig sweep_variant(const RunConfig& cfg, int resolution, bool extended);

}  // namespace upseg
