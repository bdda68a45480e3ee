#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "upseg/complexity.hpp"
#include "upseg/metrics.hpp"
#include "upseg/training.hpp"

namespace upseg::cli {

// Stable process exit codes.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kDiverged = 3,
    kMismatch = 4,
    kIoError = 5,
};

struct Options {
    std::filesystem::path config;
    std::filesystem::path out = ".";
    std::optional<std::uint64_t> seed;
    std::vector<int> resolutions;
    std::filesystem::path checkpoint;   // eval: defaults to <out>/checkpoint.utsr
    std::filesystem::path dataset;      // eval: defaults to the config's validation split
    std::filesystem::path predictions;  // eval: score stored masks instead of a model
    bool parallel = false;
    bool quiet = false;
};

RunConfig load_config(const Options& opts);

TrainResult cmd_train(const Options& opts, std::ostream& log);
EvaluationSummary cmd_eval(const Options& opts, std::ostream& log);
ComplexityReport cmd_profile(const Options& opts, std::ostream& out);
std::vector<SweepRow> cmd_sweep(const Options& opts, std::ostream& log);
void cmd_generate(const Options& opts, std::ostream& log);

/// `images,macro_dice,macro_jaccard,pooled_dice,pooled_jaccard,dice_<k>,jaccard_<k>...`
std::string metrics_csv(const EvaluationSummary& summary);

int exit_code_for(const std::exception& e);
int run(int argc, char** argv);

}  // namespace upseg::cli
