#include "upseg/loss.hpp"

#include <string>

#include "upseg/errors.hpp"
#include "upseg/ops.hpp"
#include "upseg/resample.hpp"

namespace upseg {

void LossConfig::validate() const {
    if (num_stages < 0) throw ConfigError("loss: number of stages must be >= 0");
    if (!stage_weights.empty() &&
        stage_weights.size() != static_cast<std::size_t>(num_stages) + 1) {
        throw ConfigError("loss.stage_weights has " + std::to_string(stage_weights.size()) +
                          " entries, expected " + std::to_string(num_stages + 1));
    }
    for (double w : stage_weights) {
        if (!(w >= 0.0)) throw ConfigError("loss.stage_weights must be non-negative");
    }
}

double LossConfig::weight(int stage) const {
    return stage_weights.empty() ? 1.0 : stage_weights[static_cast<std::size_t>(stage)];
}

Mask resize_target(const Mask& gt, int stage, int num_stages) {
    if (stage < 0 || stage > num_stages) {
        throw ConfigError("stage " + std::to_string(stage) + " outside [0, " +
                          std::to_string(num_stages) + "]");
    }
    return downscale_mask(gt, 1 << (num_stages - stage));
}

Tensor l_sum(const std::vector<Tensor>& taps, const Mask& gt, const LossConfig& cfg) {
    cfg.validate();
    if (taps.size() != static_cast<std::size_t>(cfg.num_stages) + 1) {
        throw ConfigError("l_sum got " + std::to_string(taps.size()) + " taps for " +
                          std::to_string(cfg.num_stages) + " stages");
    }
    Tensor total;
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const auto& tap = taps[i];
        if (tap.rank() != 4 || tap.dim(2) <= 0 || gt.height % tap.dim(2) != 0 ||
            gt.width % tap.dim(3) != 0 || gt.height / tap.dim(2) != gt.width / tap.dim(3)) {
            throw ShapeError("tap " + std::to_string(i) + " " + shape_to_string(tap.shape()) +
                             " does not evenly divide the ground truth extent");
        }
        const int factor = static_cast<int>(gt.height / tap.dim(2));
        Tensor term = cross_entropy(tap, downscale_mask(gt, factor));
        const double w = cfg.weight(static_cast<int>(i));
        if (w != 1.0) term = scale(term, w);
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

}  // namespace upseg
