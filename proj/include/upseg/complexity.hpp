#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "upseg/graph.hpp"

namespace upseg {

struct LayerCost {
    int index = 0;
    std::string name;
    LayerKind kind = LayerKind::Input;
    Shape output_shape;
    std::int64_t params = 0;
    std::int64_t macs = 0;
    std::int64_t activation_bytes = 0;
};

/// Static cost model for one single-channel image: multiply-accumulates of
/// conv layers, forward activation memory at 4 bytes per scalar.
struct ComplexityReport {
    std::int64_t input_height = 0;
    std::int64_t input_width = 0;
    std::vector<LayerCost> layers;
    std::int64_t total_params = 0;
    std::int64_t total_macs = 0;
    std::int64_t total_activation_bytes = 0;

    double gmacs() const { return static_cast<double>(total_macs) * 1e-9; }
    std::int64_t parameter_bytes() const { return total_params * 4; }
    double activation_megabytes() const;

    /// Header `layer,name,params,macs,act_bytes`, one row per layer.
    std::string to_csv() const;
    std::string to_table() const;
};

/// Conv: H_out W_out C_out K_h K_w C_in. Transposed conv: H_in W_in C_in K_h K_w C_out.
/// Pooling, ReLU and concatenation cost no MACs. The input layer is not listed.
ComplexityReport profile(const ModelGraph& graph, std::int64_t height, std::int64_t width);

struct OverheadSummary {
    std::int64_t params = 0;
    std::int64_t macs = 0;
    std::int64_t activation_bytes = 0;
    double params_relative = 0.0;
    double macs_relative = 0.0;
    double activation_relative = 0.0;
};

/// extended - base, absolute and relative to base. Both reports must share
/// the input resolution.
OverheadSummary upscale_overhead(const ComplexityReport& base, const ComplexityReport& extended);

}  // namespace upseg
