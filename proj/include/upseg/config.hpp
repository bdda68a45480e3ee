#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "upseg/data.hpp"
#include "upseg/graph.hpp"
#include "upseg/loss.hpp"

namespace upseg {

struct OptimizerConfig {
    std::string kind = "adam";  // adam | sgd
    double lr = 1e-3;
    int batch_size = 8;
    int max_epochs = 50;
    std::uint64_t seed = 0;
    int patience = 10;
    double min_delta = 1e-4;
};

/// Everything a run needs. Text form is flat `section.key = value` lines;
/// `#` starts a comment.
struct RunConfig {
    BackboneConfig backbone;
    UpscaleStackConfig stack;
    LossConfig loss;
    OptimizerConfig optimizer;
    DatasetSpec data;
    std::string data_path;  // optional UTSR dataset; overrides generation
    double val_fraction = 1.0 / 3.0;
    std::string report_path;

    /// Throws ConfigError naming the offending line and key.
    static RunConfig parse(std::string_view text, const std::string& source = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    /// Applies one `section.key` assignment.
    void set(const std::string& key, const std::string& value);
    void validate() const;
    std::string to_text() const;

    /// Output resolution of the last tap.
    int output_res() const { return data.input_res << stack.num_stages; }
};

}  // namespace upseg
