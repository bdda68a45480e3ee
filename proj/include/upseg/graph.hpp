#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "upseg/tensor.hpp"

namespace upseg {

/// Plain U-Net: `depth` down-samplings, widths doubling from base_channels.
struct BackboneConfig {
    int in_channels = 1;
    int base_channels = 8;
    int depth = 2;
    int num_classes = 1;

    void validate() const;
    /// Widths of the original U-Net (64 .. 1024, four poolings).
    static BackboneConfig classic_unet(int num_classes = 1);
};

/// The up-scaling extension: m stages of ConvTranspose2d(2x2, s2) + Conv2d(3x3),
/// each N_c -> N_c channels, appended after the backbone's output.
struct UpscaleStackConfig {
    int num_stages = 0;
    int num_classes = 1;
    bool use_skips = false;
    std::set<int> skip_exempt_stages{1};
    /// ReLU between a stage's transposed conv and its conv (off by default).
    bool stage_relu = false;

    void validate() const;
    /// Whether stage `stage` (0-based) receives the stretched Y_0 skip inputs.
    bool takes_skip(int stage) const;
};

enum class LayerKind { Input, Conv2d, ConvTranspose2d, MaxPool2d, Relu, Concat };

const char* layer_kind_name(LayerKind kind);

struct Layer {
    std::string name;
    LayerKind kind = LayerKind::Input;
    std::vector<int> inputs;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;
    int weight = -1;  // index into ModelGraph::parameters(), -1 if none
    int bias = -1;
};

struct Parameter {
    std::string name;
    Tensor tensor;
};

/// Layer DAG in topological order. Layer 0 is the input. The structure is
/// fixed after build; parameter values change only through the optimizer.
class ModelGraph {
public:
    const std::vector<Layer>& layers() const { return layers_; }
    const std::vector<Parameter>& parameters() const { return params_; }
    std::vector<Tensor> parameter_tensors() const;
    const Parameter* find_parameter(const std::string& name) const;

    /// Layer ids of the per-stage outputs Y_0 .. Y_m.
    const std::vector<int>& taps() const { return taps_; }
    int num_stages() const { return static_cast<int>(taps_.size()) - 1; }
    int in_channels() const { return in_channels_; }
    int num_classes() const { return num_classes_; }
    /// Input height and width must be multiples of this.
    int spatial_divisor() const { return divisor_; }

    /// Deep copy; the clone shares no parameter storage with this graph.
    ModelGraph clone() const;

private:
    friend class GraphBuilder;
    std::vector<Layer> layers_;
    std::vector<Parameter> params_;
    std::vector<int> taps_;
    int in_channels_ = 0;
    int num_classes_ = 0;
    int divisor_ = 1;
};

ModelGraph build_unet(const BackboneConfig& cfg, std::uint64_t seed = 0);

/// Returns a new graph: a copy of `base` (identical weights) with the stack
/// appended. `base` itself is left untouched.
ModelGraph build_upscale_stack(const ModelGraph& base, const UpscaleStackConfig& cfg,
                               std::uint64_t seed = 0);

/// Scalar count by enumerating parameter tensors.
std::int64_t count_parameters(const ModelGraph& graph);

/// sum over conv-type layers of (K_h * K_w * c_in + 1) * c_out, read from the
/// layer descriptions rather than the tensors.
std::int64_t analytic_layer_params(const ModelGraph& graph);

/// m * (13 N_c^2 + 2 N_c): a 2x2 transposed conv plus a 3x3 conv per stage.
std::int64_t analytic_upscale_params(int num_classes, int num_stages);

/// Closed form for a stack with skips, term by term:
/// plain stages (13 N_c^2 + 2 N_c); for a skip stage k a chain of k + 1
/// transposed convs (4 N_c^2 + N_c each), one 3x3 conv (9 N_c^2 + N_c), and the
/// stage itself with doubled inputs ((8 N_c + 1) N_c + (18 N_c + 1) N_c).
std::int64_t analytic_stack_params(const UpscaleStackConfig& cfg);

/// Output shape of every layer for an N x C x H x W input.
std::vector<Shape> infer_shapes(const ModelGraph& graph, const Shape& input_shape);

/// Every layer output, index-aligned with graph.layers().
std::vector<Tensor> forward(const ModelGraph& graph, const Tensor& input);

/// Stage outputs Y_0 .. Y_m as logits; Y_i has 2^i times the input extent.
std::vector<Tensor> forward_all_taps(const ModelGraph& graph, const Tensor& input);

}  // namespace upseg
