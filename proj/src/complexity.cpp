#include "upseg/complexity.hpp"

#include <iomanip>
#include <sstream>

#include "upseg/errors.hpp"

namespace upseg {

double ComplexityReport::activation_megabytes() const {
    return static_cast<double>(total_activation_bytes) / (1024.0 * 1024.0);
}

std::string ComplexityReport::to_csv() const {
    std::ostringstream os;
    os << "layer,name,params,macs,act_bytes\n";
    for (const auto& l : layers) {
        os << l.index << ',' << l.name << ',' << l.params << ',' << l.macs << ','
           << l.activation_bytes << '\n';
    }
    return os.str();
}

std::string ComplexityReport::to_table() const {
    std::ostringstream os;
    os << "input " << input_height << "x" << input_width << "\n";
    os << std::left << std::setw(28) << "layer" << std::setw(18) << "kind" << std::right
       << std::setw(12) << "params" << std::setw(16) << "MACs" << std::setw(14) << "act bytes"
       << "\n";
    for (const auto& l : layers) {
        os << std::left << std::setw(28) << l.name << std::setw(18) << layer_kind_name(l.kind)
           << std::right << std::setw(12) << l.params << std::setw(16) << l.macs << std::setw(14)
           << l.activation_bytes << "\n";
    }
    os << std::fixed << std::setprecision(4);
    os << "total params " << total_params << " (" << parameter_bytes() << " bytes)\n";
    os << "total MACs " << total_macs << " (" << gmacs() << " GMac)\n";
    os << "activations " << total_activation_bytes << " bytes (" << activation_megabytes()
       << " MB)\n";
    return os.str();
}

ComplexityReport profile(const ModelGraph& graph, std::int64_t height, std::int64_t width) {
    const auto shapes = infer_shapes(graph, {1, graph.in_channels(), height, width});
    ComplexityReport r;
    r.input_height = height;
    r.input_width = width;
    const auto& layers = graph.layers();
    const auto& params = graph.parameters();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        if (l.kind == LayerKind::Input) continue;
        LayerCost c;
        c.index = static_cast<int>(i);
        c.name = l.name;
        c.kind = l.kind;
        c.output_shape = shapes[i];
        if (l.weight >= 0) c.params += params[static_cast<std::size_t>(l.weight)].tensor.numel();
        if (l.bias >= 0) c.params += params[static_cast<std::size_t>(l.bias)].tensor.numel();
        const std::int64_t k2 = static_cast<std::int64_t>(l.kernel) * l.kernel;
        if (l.kind == LayerKind::Conv2d) {
            c.macs = shapes[i][2] * shapes[i][3] * l.out_channels * k2 * l.in_channels;
        } else if (l.kind == LayerKind::ConvTranspose2d) {
            const Shape& in = shapes[static_cast<std::size_t>(l.inputs.front())];
            c.macs = in[2] * in[3] * l.in_channels * k2 * l.out_channels;
        }
        c.activation_bytes = shape_numel(shapes[i]) * 4;
        r.total_params += c.params;
        r.total_macs += c.macs;
        r.total_activation_bytes += c.activation_bytes;
        r.layers.push_back(std::move(c));
    }
    return r;
}

OverheadSummary upscale_overhead(const ComplexityReport& base, const ComplexityReport& extended) {
    if (base.input_height != extended.input_height || base.input_width != extended.input_width) {
        throw UsageError("overhead requires reports at the same input resolution");
    }
    auto rel = [](std::int64_t delta, std::int64_t ref) {
        return ref == 0 ? 0.0 : static_cast<double>(delta) / static_cast<double>(ref);
    };
    OverheadSummary s;
    s.params = extended.total_params - base.total_params;
    s.macs = extended.total_macs - base.total_macs;
    s.activation_bytes = extended.total_activation_bytes - base.total_activation_bytes;
    s.params_relative = rel(s.params, base.total_params);
    s.macs_relative = rel(s.macs, base.total_macs);
    s.activation_relative = rel(s.activation_bytes, base.total_activation_bytes);
    return s;
}

}  // namespace upseg
