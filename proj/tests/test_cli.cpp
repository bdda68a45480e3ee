#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"
#include "upseg/tensor_file.hpp"

using namespace upseg;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(model.base_channels = 4
model.depth = 1
model.upscale_stages = 2
optimizer.batch_size = 4
optimizer.max_epochs = 2
optimizer.seed = 3
data.num_samples = 12
data.input_res = 8
data.gt_res = 32
)";

struct Workspace {
    fs::path root;
    Workspace() {
        static int counter = 0;
        root = fs::temp_directory_path() /
               ("upseg_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(root);
    }
    ~Workspace() { fs::remove_all(root); }

    fs::path config(const std::string& name, const std::string& text) const {
        std::ofstream(root / name) << text;
        return root / name;
    }
};

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "upseg");
    args.push_back("--quiet");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("usage errors exit with the config code") {
    Workspace ws;
    CHECK(run({"train"}) == cli::kConfigError);
    CHECK(run({"launch", "--config", "x"}) == cli::kConfigError);
    CHECK(run({"train", "--config", ws.config("bad.cfg", "model.depht = 2\n").string()}) == cli::kConfigError);
    CHECK(run({"sweep", "--config", ws.config("ok.cfg", kTiny).string(), "--resolutions", "8,x"}) ==
          cli::kConfigError);
}

TEST_CASE("train then eval") {
    Workspace ws;
    const auto cfg = ws.config("run.cfg", kTiny).string();
    const auto out = (ws.root / "out").string();
    REQUIRE(run({"train", "--config", cfg, "--out", out}) == cli::kOk);
    CHECK(fs::exists(ws.root / "out" / "checkpoint.utsr"));
    const auto log = slurp(ws.root / "out" / "train_log.csv");
    CHECK(log.find('\r') == std::string::npos);
    auto rows = lines(log);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "epoch,train_loss,val_dice,val_jaccard");
    CHECK(rows[1].starts_with("1,"));

    REQUIRE(run({"eval", "--config", cfg, "--out", out}) == cli::kOk);
    auto metrics = lines(slurp(ws.root / "out" / "metrics.csv"));
    REQUIRE(metrics.size() == 2);
    CHECK(metrics[0] == "images,macro_dice,macro_jaccard,pooled_dice,pooled_jaccard,dice_0,jaccard_0,dice_1,jaccard_1");
    CHECK(metrics[1].starts_with("4,"));

    SUBCASE("checkpoint from another architecture") {
        const auto wider = ws.config("wide.cfg", std::string(kTiny) + "model.base_channels = 8\n").string();
        CHECK(run({"eval", "--config", wider, "--out", out}) == cli::kMismatch);
    }
    SUBCASE("missing inputs") {
        CHECK(run({"train", "--config", (ws.root / "absent.cfg").string()}) == cli::kIoError);
        CHECK(run({"eval", "--config", cfg, "--checkpoint", (ws.root / "nope.utsr").string()}) == cli::kIoError);
    }
    SUBCASE("seed override changes the run") {
        const auto other = (ws.root / "other").string();
        REQUIRE(run({"train", "--config", cfg, "--out", other, "--seed", "99"}) == cli::kOk);
        CHECK(slurp(ws.root / "other" / "checkpoint.utsr") != slurp(ws.root / "out" / "checkpoint.utsr"));
    }
}

TEST_CASE("eval of stored predictions") {
    Workspace ws;
    const auto cfg = ws.config("run.cfg", kTiny).string();
    const auto data_path = ws.root / "data.utsr";
    REQUIRE(run({"generate", "--config", cfg, "--dataset", data_path.string()}) == cli::kOk);
    auto data = load_dataset(data_path);

    write_tensor_file(ws.root / "oracle.utsr", {to_record("masks", data.masks)});
    auto perfect = cli::cmd_eval({.config = cfg, .out = ws.root, .dataset = data_path,
                                  .predictions = ws.root / "oracle.utsr", .quiet = true},
                                 std::cerr);
    CHECK(perfect.macro_dice == 1.0);
    CHECK(perfect.macro_jaccard == 1.0);
    CHECK(perfect.pooled.mean_jaccard == 1.0);

    write_tensor_file(ws.root / "empty.utsr", {to_record("masks", Mask(data.size(), 32, 32))});
    auto empty = cli::cmd_eval({.config = cfg, .out = ws.root, .dataset = data_path,
                                .predictions = ws.root / "empty.utsr", .quiet = true},
                               std::cerr);
    CHECK(empty.pooled.dice[1] == 0.0);
    CHECK(empty.pooled.jaccard[1] == 0.0);

    write_tensor_file(ws.root / "small.utsr", {to_record("masks", Mask(data.size(), 8, 8))});
    CHECK(run({"eval", "--config", cfg, "--dataset", data_path.string(), "--predictions",
               (ws.root / "small.utsr").string(), "--out", ws.root.string()}) == cli::kMismatch);
    std::ofstream(ws.root / "garbage.utsr") << "garbage";
    CHECK(run({"eval", "--config", cfg, "--dataset", (ws.root / "garbage.utsr").string(), "--out",
               ws.root.string()}) == cli::kIoError);
}

TEST_CASE("non-finite data makes training exit as diverged") {
    Workspace ws;
    DatasetSpec spec;
    spec.num_samples = 12;
    spec.input_res = 8;
    spec.gt_res = 32;
    auto data = generate(spec);
    auto values = data.images.mutable_data();
    std::fill(values.begin(), values.end(), std::nan(""));
    save_dataset(ws.root / "nan.utsr", data);
    const auto cfg = ws.config("nan.cfg", std::string(kTiny) + "data.path = " + (ws.root / "nan.utsr").string() + "\n");
    CHECK(run({"train", "--config", cfg.string(), "--out", ws.root.string()}) == cli::kDiverged);
}

TEST_CASE("profile") {
    Workspace ws;
    const std::string base = "data.input_res = 16\ndata.gt_res = 256\n";
    auto baseline = cli::cmd_profile({.config = ws.config("b.cfg", base), .out = ws.root / "b", .quiet = true}, std::cout);
    auto extended = cli::cmd_profile(
        {.config = ws.config("e.cfg", base + "model.upscale_stages = 4\n"), .out = ws.root / "e", .quiet = true}, std::cout);
    CHECK(extended.total_params - baseline.total_params == 60);

    cli::cmd_profile({.config = ws.config("z.cfg", base + "model.upscale_stages = 0\n"), .out = ws.root / "z", .quiet = true},
                     std::cout);
    CHECK(slurp(ws.root / "z" / "profile.csv") == slurp(ws.root / "b" / "profile.csv"));

    auto halved = cli::cmd_profile(
        {.config = ws.config("h.cfg", "data.input_res = 8\ndata.gt_res = 256\n"), .out = ws.root / "h", .quiet = true},
        std::cout);
    CHECK(static_cast<double>(baseline.total_macs) / static_cast<double>(halved.total_macs) ==
          doctest::Approx(4.0).epsilon(0.01));
    CHECK(lines(slurp(ws.root / "b" / "profile.csv")).front() == "layer,name,params,macs,act_bytes");
}

TEST_CASE("sweep") {
    Workspace ws;
    const auto cfg = ws.config("s.cfg", std::string(kTiny) + "optimizer.max_epochs = 1\n").string();
    REQUIRE(run({"sweep", "--config", cfg, "--out", (ws.root / "seq").string(), "--resolutions", "8,16"}) == cli::kOk);
    auto rows = lines(slurp(ws.root / "seq" / "sweep.csv"));
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "resolution,gmacs,params,mean_dice,mean_jaccard,variant");
    CHECK(rows[1].ends_with(",baseline"));
    CHECK(rows[2].ends_with(",extended"));

    ::setenv("UPSEG_THREADS", "2", 1);
    REQUIRE(run({"sweep", "--config", cfg, "--out", (ws.root / "par").string(), "--resolutions", "8,16",
                 "--parallel"}) == cli::kOk);
    ::unsetenv("UPSEG_THREADS");
    CHECK(slurp(ws.root / "par" / "sweep.csv") == slurp(ws.root / "seq" / "sweep.csv"));

    CHECK(run({"sweep", "--config", cfg, "--out", ws.root.string(), "--resolutions", "12"}) == cli::kConfigError);
}

TEST_CASE("training is byte-for-byte repeatable") {
    Workspace ws;
    const auto cfg = ws.config("run.cfg", kTiny).string();
    REQUIRE(run({"train", "--config", cfg, "--out", (ws.root / "a").string()}) == cli::kOk);
    REQUIRE(run({"train", "--config", cfg, "--out", (ws.root / "b").string()}) == cli::kOk);
    CHECK(slurp(ws.root / "a" / "train_log.csv") == slurp(ws.root / "b" / "train_log.csv"));
    CHECK(slurp(ws.root / "a" / "checkpoint.utsr") == slurp(ws.root / "b" / "checkpoint.utsr"));
}
