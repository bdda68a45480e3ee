#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "upseg/config.hpp"
#include "upseg/errors.hpp"
#include "upseg/loss.hpp"
#include "upseg/ops.hpp"
#include "upseg/resample.hpp"
#include "upseg/training.hpp"

using namespace upseg;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(int stages) {
    return RunConfig::parse(R"(
model.base_channels = 4
model.depth = 1
model.upscale_stages = )" + std::to_string(stages) + R"(
optimizer.batch_size = 4
optimizer.max_epochs = 3
optimizer.seed = 5
data.num_samples = 18
data.input_res = 8
data.gt_res = 32
)");
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool same_parameters(const ModelGraph& a, const ModelGraph& b) {
    if (a.parameters().size() != b.parameters().size()) return false;
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        if (!std::ranges::equal(a.parameters()[i].tensor.data(), b.parameters()[i].tensor.data())) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("config parsing") {
    auto cfg = RunConfig::parse("# comment\nmodel.num_classes = 3  # trailing\n\nmodel.upscale_stages = 2\n"
                                "loss.stage_weights = 1, 0.5, 2\noptimizer.seed = 18446744073709551615\n"
                                "data.shape_family = blobs\n");
    CHECK(cfg.backbone.num_classes == 3);
    CHECK(cfg.stack.num_classes == 3);
    CHECK(cfg.data.num_classes == 3);
    CHECK(cfg.stack.num_stages == 2);
    CHECK(cfg.loss.num_stages == 2);
    CHECK(cfg.loss.stage_weights == std::vector<double>{1.0, 0.5, 2.0});
    CHECK(cfg.optimizer.seed == 18446744073709551615ULL);
    CHECK(cfg.data.shape_family == ShapeFamily::Blobs);
    CHECK(cfg.output_res() == 64);

    auto again = RunConfig::parse(cfg.to_text());
    CHECK(again.to_text() == cfg.to_text());

    CHECK(message_of([] { RunConfig::parse("model.depth = 2\nmodel.deptj = 3\n", "run.cfg"); })
              .starts_with("run.cfg:2:"));
    CHECK(message_of([] { RunConfig::parse("optimizer.lr = fast\n"); }).find("optimizer.lr") != std::string::npos);
    CHECK_THROWS_AS(RunConfig::parse("just words\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("depth = 2\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("optimizer.lr = 0\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("optimizer.kind = rmsprop\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("model.use_skips = maybe\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("data.input_res = 20\nmodel.depth = 3\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("model.upscale_stages = 2\nloss.stage_weights = 1, 1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("optimizer.seed = -1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/run.cfg"), IoError);
}

TEST_CASE("first-batch loss equals the directly computed multi-scale loss") {
    auto cfg = tiny(2);
    auto [train, val] = split(generate(cfg.data), cfg.val_fraction);
    Trainer trainer(cfg, train, val);
    const auto batch = trainer.epoch_batches(1).front();

    auto model = build_unet(cfg.backbone, cfg.optimizer.seed);
    model = build_upscale_stack(model, cfg.stack, cfg.optimizer.seed);
    auto taps = forward_all_taps(model, train.image_batch(batch));
    const Mask gt = train.mask_batch(batch);
    double expect = 0.0;
    for (std::size_t i = 0; i < taps.size(); ++i) {
        expect += cross_entropy(taps[i], downscale_mask(gt, static_cast<int>(gt.height / taps[i].dim(2)))).item();
    }
    CHECK(std::abs(trainer.train_step(batch) - expect) <= 1e-12);
}

TEST_CASE("zero stages train exactly like the bare backbone") {
    auto cfg = tiny(0);
    auto [train, val] = split(generate(cfg.data), cfg.val_fraction);
    Trainer trainer(cfg, train, val);
    trainer.train_epoch(1);
    trainer.train_epoch(2);

    auto model = build_unet(cfg.backbone, cfg.optimizer.seed);
    auto params = model.parameter_tensors();
    Adam adam(params, cfg.optimizer.lr);
    for (int epoch : {1, 2}) {
        for (const auto& batch : trainer.epoch_batches(epoch)) {
            adam.zero_grad();
            auto out = forward_all_taps(model, train.image_batch(batch)).front();
            const Mask gt = train.mask_batch(batch);
            backward(cross_entropy(out, downscale_mask(gt, static_cast<int>(gt.height / out.dim(2)))));
            adam.step();
        }
    }
    CHECK(same_parameters(trainer.model(), model));
}

TEST_CASE("epoch order is a seeded permutation") {
    auto cfg = tiny(1);
    auto [train, val] = split(generate(cfg.data), cfg.val_fraction);
    Trainer t(cfg, train, val);
    auto b1 = t.epoch_batches(1), b2 = t.epoch_batches(2);
    CHECK(b1 == t.epoch_batches(1));
    CHECK(b1 != b2);
    std::vector<std::int64_t> all;
    for (const auto& b : b1) all.insert(all.end(), b.begin(), b.end());
    std::ranges::sort(all);
    CHECK(all.size() == static_cast<std::size_t>(train.size()));
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == static_cast<std::int64_t>(i));
    CHECK(b1.front().size() == 4);
}

TEST_CASE("training is deterministic and keeps the best epoch") {
    auto cfg = tiny(2);
    cfg.optimizer.max_epochs = 4;
    auto [train, val] = split(generate(cfg.data), cfg.val_fraction);
    Trainer a(cfg, train, val), b(cfg, train, val);
    auto ra = a.run(), rb = b.run();
    CHECK(history_csv(ra.history) == history_csv(rb.history));
    CHECK(same_parameters(a.model(), b.model()));
    CHECK(ra.history.size() == 4);
    CHECK(history_csv(ra.history).starts_with("epoch,train_loss,val_dice,val_jaccard\n"));
    CHECK(a.validate().macro_jaccard == doctest::Approx(ra.best_val_jaccard).epsilon(1e-12));
    for (const auto& r : ra.history) CHECK(r.val_jaccard <= ra.best_val_jaccard + cfg.optimizer.min_delta);
}

TEST_CASE("early stopping honours patience") {
    auto cfg = tiny(0);
    cfg.optimizer.lr = 1e-9;
    cfg.optimizer.max_epochs = 20;
    cfg.optimizer.patience = 2;
    auto [train, val] = split(generate(cfg.data), cfg.val_fraction);
    auto r = Trainer(cfg, train, val).run();
    CHECK(r.early_stopped);
    CHECK(r.history.size() == static_cast<std::size_t>(r.best_epoch + 2));
}

TEST_CASE("checkpoints") {
    const fs::path dir = fs::temp_directory_path() / ("upseg_ckpt_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto cfg = tiny(2);
    auto model = build_model(cfg);
    save_checkpoint(dir / "a.utsr", model);

    auto other_seed = cfg;
    other_seed.optimizer.seed = 77;
    auto restored = build_model(other_seed);
    CHECK_FALSE(same_parameters(model, restored));
    load_checkpoint(dir / "a.utsr", restored);
    CHECK(same_parameters(model, restored));

    auto fewer = build_model(tiny(1));
    CHECK_THROWS_AS(load_checkpoint(dir / "a.utsr", fewer), MismatchError);
    auto wider_cfg = tiny(2);
    wider_cfg.backbone.base_channels = 8;
    auto wider = build_model(wider_cfg);
    CHECK_THROWS_AS(load_checkpoint(dir / "a.utsr", wider), MismatchError);
    std::ofstream(dir / "junk.utsr") << "not a tensor file";
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.utsr", restored), MismatchError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.utsr", restored), IoError);
    fs::remove_all(dir);
}

TEST_CASE("a non-finite loss is reported as divergence") {
    auto cfg = tiny(1);
    auto [train, val] = split(generate(cfg.data), cfg.val_fraction);
    train.images.mutable_data()[0] = std::nan("");
    Trainer t(cfg, train, val);
    std::vector<std::int64_t> first{0, 1};
    CHECK_THROWS_AS(t.train_step(first), DivergenceError);
}

TEST_CASE("sweep rows") {
    auto cfg = tiny(0);
    cfg.optimizer.max_epochs = 1;
    auto rows = run_sweep(cfg, {8, 16});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].variant == "baseline");
    CHECK(rows[1].variant == "extended");
    CHECK(rows[0].resolution == 8);
    CHECK(rows[2].resolution == 16);
    CHECK(rows[1].params - rows[0].params == analytic_upscale_params(1, 2));
    CHECK(rows[3].params - rows[2].params == analytic_upscale_params(1, 1));
    CHECK(rows[2].gmacs > rows[0].gmacs);
    CHECK(rows[3].gmacs > rows[1].gmacs);
    CHECK(sweep_csv(rows).starts_with("resolution,gmacs,params,mean_dice,mean_jaccard,variant\n"));

    CHECK(sweep_csv(run_sweep(cfg, {8, 16}, 3)) == sweep_csv(rows));
    CHECK_THROWS_AS(run_sweep(cfg, {12}), ConfigError);
    CHECK_THROWS_AS(run_sweep(cfg, {}), ConfigError);
}
