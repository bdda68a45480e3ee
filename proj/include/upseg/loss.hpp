#pragma once

#include <vector>

#include "upseg/mask.hpp"
#include "upseg/resample.hpp"
#include "upseg/tensor.hpp"

namespace upseg {

/// Deep-supervision loss over the stage taps Y_0 .. Y_m.
struct LossConfig {
    int num_stages = 0;
    /// One weight per tap; empty means all ones.
    std::vector<double> stage_weights;

    void validate() const;
    double weight(int stage) const;
};

/// Ground truth at resolution M = input * 2^m brought to the extent of tap
/// `stage`, i.e. down-scaled by 2^(m - stage).
Mask resize_target(const Mask& gt, int stage, int num_stages);

/// sum_i w_i * CE(Y_i, gt resized to Y_i's extent). Each tap's extent must
/// divide the ground-truth extent by an integer factor.
Tensor l_sum(const std::vector<Tensor>& taps, const Mask& gt, const LossConfig& cfg);

}  // namespace upseg
