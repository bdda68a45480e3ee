#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "upseg/mask.hpp"
#include "upseg/tensor.hpp"

namespace upseg {

/// Nearest-neighbour label down-scaling: each output takes the top-left label
/// of its factor x factor block, so no new labels can appear.
Mask downscale_mask(const Mask& mask, int factor);

/// Area-average down-scaling of an N x C x H x W image (no autodiff).
Tensor downscale_image(const Tensor& image, int factor);

/// Bilinear resize of one row-major plane with half-pixel centres
/// (align_corners = false); source coordinates are clamped at the border.
std::vector<double> bilinear_resize(std::span<const double> plane, std::int64_t height,
                                    std::int64_t width, std::int64_t out_height,
                                    std::int64_t out_width);

}  // namespace upseg
