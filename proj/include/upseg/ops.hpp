#pragma once

#include <vector>

#include "upseg/mask.hpp"
#include "upseg/tensor.hpp"

namespace upseg {

// Differentiable primitives. Image tensors are N x C x H x W.

/// weight: C_out x C_in x K_h x K_w, bias: C_out.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride = 1, int padding = 0);

/// weight: C_in x C_out x K_h x K_w, bias: C_out. H' = (H - 1) * stride + K_h.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride = 2);

/// Gradient goes to the first maximum of each window in row-major scan order.
/// A NaN in the window wins, so divergence is never masked.
Tensor maxpool2d(const Tensor& input, int window = 2, int stride = 2);

Tensor relu(const Tensor& input);
Tensor softmax_channel(const Tensor& input);
Tensor concat_channels(const std::vector<Tensor>& inputs);
Tensor upsample_nearest(const Tensor& input, int factor);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
/// sum_i a_i * weights_i with weights treated as a constant.
Tensor weighted_sum(const Tensor& a, const Tensor& weights);

/// Mean per-pixel cross-entropy.
///
/// One-channel logits use the sigmoid / binary form and expect labels {0, 1};
/// multi-channel logits use softmax over channels and labels in [0, C).
/// target must be N x H x W with the logits' batch and spatial extents.
Tensor cross_entropy(const Tensor& logits, const Mask& target);

double sigmoid(double x);

}  // namespace upseg
