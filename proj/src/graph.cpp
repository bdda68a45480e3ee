#include "upseg/graph.hpp"

#include <cmath>

#include "upseg/errors.hpp"
#include "upseg/ops.hpp"
#include "upseg/rng.hpp"

namespace upseg {

void BackboneConfig::validate() const {
    if (in_channels < 1) throw ConfigError("model.in_channels must be >= 1");
    if (base_channels < 1) throw ConfigError("model.base_channels must be >= 1");
    if (depth < 1) throw ConfigError("model.depth must be >= 1");
    if (depth > 12) throw ConfigError("model.depth is unreasonably large");
    if (num_classes < 1) throw ConfigError("model.num_classes must be >= 1");
}

BackboneConfig BackboneConfig::classic_unet(int num_classes) {
    return BackboneConfig{1, 64, 4, num_classes};
}

void UpscaleStackConfig::validate() const {
    if (num_stages < 0) throw ConfigError("model.upscale_stages must be >= 0");
    if (num_classes < 1) throw ConfigError("model.num_classes must be >= 1");
}

bool UpscaleStackConfig::takes_skip(int stage) const {
    // Stage 0 already consumes Y_0 directly.
    return use_skips && stage >= 1 && !skip_exempt_stages.contains(stage);
}

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Input: return "input";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::ConvTranspose2d: return "conv_transpose2d";
        case LayerKind::MaxPool2d: return "maxpool2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::Concat: return "concat";
    }
    return "?";
}

std::vector<Tensor> ModelGraph::parameter_tensors() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.tensor);
    return out;
}

const Parameter* ModelGraph::find_parameter(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

ModelGraph ModelGraph::clone() const {
    ModelGraph copy = *this;
    for (auto& p : copy.params_) p.tensor = p.tensor.clone();
    return copy;
}

class GraphBuilder {
public:
    GraphBuilder(ModelGraph graph, std::uint64_t seed) : g_(std::move(graph)), rng_(seed) {}

    int input(int channels) {
        Layer l;
        l.name = "input";
        l.kind = LayerKind::Input;
        l.out_channels = channels;
        g_.in_channels_ = channels;
        return push(std::move(l));
    }

    int conv(const std::string& name, int from, int cout, int kernel, int padding) {
        Layer l;
        l.name = name;
        l.kind = LayerKind::Conv2d;
        l.inputs = {from};
        l.in_channels = channels(from);
        l.out_channels = cout;
        l.kernel = kernel;
        l.padding = padding;
        l.weight = param(name + ".weight", {cout, l.in_channels, kernel, kernel},
                         l.in_channels * kernel * kernel);
        l.bias = param(name + ".bias", {cout}, 0);
        return push(std::move(l));
    }

    int conv_transpose(const std::string& name, int from, int cout) {
        Layer l;
        l.name = name;
        l.kind = LayerKind::ConvTranspose2d;
        l.inputs = {from};
        l.in_channels = channels(from);
        l.out_channels = cout;
        l.kernel = 2;
        l.stride = 2;
        l.weight = param(name + ".weight", {l.in_channels, cout, 2, 2}, cout * 4);
        l.bias = param(name + ".bias", {cout}, 0);
        return push(std::move(l));
    }

    int relu(const std::string& name, int from) { return simple(name, LayerKind::Relu, from); }

    int maxpool(const std::string& name, int from) {
        int id = simple(name, LayerKind::MaxPool2d, from);
        g_.layers_[static_cast<std::size_t>(id)].kernel = 2;
        g_.layers_[static_cast<std::size_t>(id)].stride = 2;
        return id;
    }

    int concat(const std::string& name, std::vector<int> from) {
        Layer l;
        l.name = name;
        l.kind = LayerKind::Concat;
        for (int f : from) l.in_channels += channels(f);
        l.out_channels = l.in_channels;
        l.inputs = std::move(from);
        return push(std::move(l));
    }

    void tap(int id) { g_.taps_.push_back(id); }
    void set_layout(int num_classes, int divisor) {
        g_.num_classes_ = num_classes;
        g_.divisor_ = divisor;
    }
    int channels(int id) const { return g_.layers_[static_cast<std::size_t>(id)].out_channels; }
    ModelGraph& graph() { return g_; }
    ModelGraph finish() { return std::move(g_); }

private:
    int push(Layer l) {
        for (const auto& existing : g_.layers_) {
            if (existing.name == l.name) throw ConfigError("duplicate layer name " + l.name);
        }
        g_.layers_.push_back(std::move(l));
        return static_cast<int>(g_.layers_.size()) - 1;
    }

    int simple(const std::string& name, LayerKind kind, int from) {
        Layer l;
        l.name = name;
        l.kind = kind;
        l.inputs = {from};
        l.in_channels = channels(from);
        l.out_channels = l.in_channels;
        return push(std::move(l));
    }

    // Kaiming-uniform (fan-in, ReLU gain) for weights; zero for biases.
    int param(const std::string& name, const Shape& shape, int fan_in) {
        auto t = Tensor::zeros(shape, true);
        if (fan_in > 0) {
            const double bound = std::sqrt(6.0 / fan_in);
            for (auto& v : t.mutable_data()) v = rng_.uniform(-bound, bound);
        }
        g_.params_.push_back({name, std::move(t)});
        return static_cast<int>(g_.params_.size()) - 1;
    }

    ModelGraph g_;
    Rng rng_;
};

ModelGraph build_unet(const BackboneConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    GraphBuilder b(ModelGraph{}, seed);
    int x = b.input(cfg.in_channels);

    auto width = [&](int level) { return cfg.base_channels << level; };
    auto double_conv = [&](const std::string& prefix, int from, int cout) {
        int h = b.conv(prefix + ".conv1", from, cout, 3, 1);
        h = b.relu(prefix + ".relu1", h);
        h = b.conv(prefix + ".conv2", h, cout, 3, 1);
        return b.relu(prefix + ".relu2", h);
    };

    std::vector<int> skips;
    for (int level = 0; level < cfg.depth; ++level) {
        const std::string prefix = "enc." + std::to_string(level);
        x = double_conv(prefix, x, width(level));
        skips.push_back(x);
        x = b.maxpool(prefix + ".pool", x);
    }
    x = double_conv("bottleneck", x, width(cfg.depth));
    for (int level = cfg.depth - 1; level >= 0; --level) {
        const std::string prefix = "dec." + std::to_string(level);
        x = b.conv_transpose(prefix + ".up", x, width(level));
        x = b.concat(prefix + ".cat", {skips[static_cast<std::size_t>(level)], x});
        x = double_conv(prefix, x, width(level));
    }
    x = b.conv("head", x, cfg.num_classes, 1, 0);
    b.tap(x);

    b.set_layout(cfg.num_classes, 1 << cfg.depth);
    return b.finish();
}

ModelGraph build_upscale_stack(const ModelGraph& base, const UpscaleStackConfig& cfg,
                               std::uint64_t seed) {
    cfg.validate();
    if (base.taps().empty()) throw ConfigError("base graph has no output tap");
    if (base.num_classes() != cfg.num_classes) {
        throw ConfigError("up-scaling stack expects the backbone to emit " +
                          std::to_string(cfg.num_classes) + " channels, got " +
                          std::to_string(base.num_classes()));
    }
    const int nc = cfg.num_classes;
    GraphBuilder b(base.clone(), derive_seed(seed, 1));
    const int y0 = b.graph().taps().back();
    int prev = y0;
    for (int k = 0; k < cfg.num_stages; ++k) {
        const std::string stage = "up." + std::to_string(k);
        if (!cfg.takes_skip(k)) {
            int h = b.conv_transpose(stage + ".convT", prev, nc);
            if (cfg.stage_relu) h = b.relu(stage + ".relu", h);
            prev = b.conv(stage + ".conv", h, nc, 3, 1);
            b.tap(prev);
            continue;
        }
        // Y_0 stretched by k + 1 transposed convs; the map after k of them
        // matches the stage input, the chain end (plus one conv) its output.
        const std::string chain = "skip." + std::to_string(k);
        int s = y0;
        int at_input = -1;
        for (int j = 0; j <= k; ++j) {
            s = b.conv_transpose(chain + ".convT." + std::to_string(j), s, nc);
            if (j == k - 1) at_input = s;
        }
        int at_output = b.conv(chain + ".conv", s, nc, 3, 1);

        int h = b.concat(stage + ".cat_in", {prev, at_input});
        h = b.conv_transpose(stage + ".convT", h, nc);
        if (cfg.stage_relu) h = b.relu(stage + ".relu", h);
        h = b.concat(stage + ".cat_out", {h, at_output});
        prev = b.conv(stage + ".conv", h, nc, 3, 1);
        b.tap(prev);
    }
    return b.finish();
}

std::int64_t count_parameters(const ModelGraph& graph) {
    std::int64_t total = 0;
    for (const auto& p : graph.parameters()) total += p.tensor.numel();
    return total;
}

std::int64_t analytic_layer_params(const ModelGraph& graph) {
    std::int64_t total = 0;
    for (const auto& l : graph.layers()) {
        if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::ConvTranspose2d) {
            total += (static_cast<std::int64_t>(l.kernel) * l.kernel * l.in_channels + 1) *
                     l.out_channels;
        }
    }
    return total;
}

std::int64_t analytic_upscale_params(int num_classes, int num_stages) {
    const std::int64_t nc = num_classes;
    return num_stages * (13 * nc * nc + 2 * nc);
}

std::int64_t analytic_stack_params(const UpscaleStackConfig& cfg) {
    cfg.validate();
    const std::int64_t nc = cfg.num_classes;
    const std::int64_t plain = 13 * nc * nc + 2 * nc;
    const std::int64_t chain_convt = 4 * nc * nc + nc;
    const std::int64_t chain_conv = 9 * nc * nc + nc;
    const std::int64_t wide_stage = (4 * 2 * nc + 1) * nc + (9 * 2 * nc + 1) * nc;
    std::int64_t total = 0;
    for (int k = 0; k < cfg.num_stages; ++k) {
        if (cfg.takes_skip(k)) total += (k + 1) * chain_convt + chain_conv + wide_stage;
        else total += plain;
    }
    return total;
}

std::vector<Shape> infer_shapes(const ModelGraph& graph, const Shape& input_shape) {
    if (input_shape.size() != 4) throw ShapeError("model input must be N x C x H x W");
    if (input_shape[1] != graph.in_channels()) {
        throw ShapeError("model expects " + std::to_string(graph.in_channels()) +
                         " input channels, got " + std::to_string(input_shape[1]));
    }
    const int d = graph.spatial_divisor();
    if (input_shape[2] % d != 0 || input_shape[3] % d != 0 || input_shape[2] < d ||
        input_shape[3] < d) {
        throw ShapeError("input extents " + shape_to_string(input_shape) +
                         " must be positive multiples of " + std::to_string(d));
    }
    std::vector<Shape> shapes;
    shapes.reserve(graph.layers().size());
    for (const auto& l : graph.layers()) {
        if (l.kind == LayerKind::Input) {
            shapes.push_back(input_shape);
            continue;
        }
        const Shape& in = shapes[static_cast<std::size_t>(l.inputs.front())];
        Shape out = in;
        switch (l.kind) {
            case LayerKind::Conv2d:
                out[1] = l.out_channels;
                out[2] = (in[2] + 2 * l.padding - l.kernel) / l.stride + 1;
                out[3] = (in[3] + 2 * l.padding - l.kernel) / l.stride + 1;
                break;
            case LayerKind::ConvTranspose2d:
                out[1] = l.out_channels;
                out[2] = (in[2] - 1) * l.stride + l.kernel;
                out[3] = (in[3] - 1) * l.stride + l.kernel;
                break;
            case LayerKind::MaxPool2d:
                out[2] = (in[2] - l.kernel) / l.stride + 1;
                out[3] = (in[3] - l.kernel) / l.stride + 1;
                break;
            case LayerKind::Concat:
                out[1] = l.out_channels;
                break;
            default:
                break;
        }
        shapes.push_back(std::move(out));
    }
    return shapes;
}

std::vector<Tensor> forward(const ModelGraph& graph, const Tensor& input) {
    infer_shapes(graph, input.shape());
    const auto& layers = graph.layers();
    const auto& params = graph.parameters();
    std::vector<Tensor> out(layers.size());
    auto in = [&](const Layer& l, std::size_t i) -> const Tensor& {
        return out[static_cast<std::size_t>(l.inputs[i])];
    };
    auto param = [&](int i) -> const Tensor& { return params[static_cast<std::size_t>(i)].tensor; };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        switch (l.kind) {
            case LayerKind::Input:
                out[i] = input;
                break;
            case LayerKind::Conv2d:
                out[i] = conv2d(in(l, 0), param(l.weight), param(l.bias), l.stride, l.padding);
                break;
            case LayerKind::ConvTranspose2d:
                out[i] = conv_transpose2d(in(l, 0), param(l.weight), param(l.bias), l.stride);
                break;
            case LayerKind::MaxPool2d:
                out[i] = maxpool2d(in(l, 0), l.kernel, l.stride);
                break;
            case LayerKind::Relu:
                out[i] = relu(in(l, 0));
                break;
            case LayerKind::Concat: {
                std::vector<Tensor> parts;
                for (std::size_t k = 0; k < l.inputs.size(); ++k) parts.push_back(in(l, k));
                out[i] = concat_channels(parts);
                break;
            }
        }
    }
    return out;
}

std::vector<Tensor> forward_all_taps(const ModelGraph& graph, const Tensor& input) {
    auto outputs = forward(graph, input);
    std::vector<Tensor> taps;
    taps.reserve(graph.taps().size());
    for (int id : graph.taps()) taps.push_back(outputs[static_cast<std::size_t>(id)]);
    return taps;
}

}  // namespace upseg
