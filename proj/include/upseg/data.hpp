#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "upseg/mask.hpp"
#include "upseg/tensor.hpp"

namespace upseg {

enum class ShapeFamily { Ellipses, Blobs };

ShapeFamily parse_shape_family(const std::string& name);
std::string shape_family_name(ShapeFamily family);

/// Synthetic segmentation set: shapes drawn at gt_res, images area-averaged
/// down to input_res plus Gaussian noise.
struct DatasetSpec {
    std::int64_t num_samples = 96;
    int input_res = 16;
    int gt_res = 256;
    int num_classes = 1;
    ShapeFamily shape_family = ShapeFamily::Ellipses;
    double noise_level = 0.05;
    std::uint64_t seed = 1;
    int min_shapes = 1;
    int max_shapes = 2;

    void validate() const;
};

/// Images N x 1 x input_res^2 in [0, 1]; masks N x gt_res^2 class indices.
struct Dataset {
    Tensor images;
    Mask masks;
    int num_classes = 1;

    std::int64_t size() const { return masks.batch; }
    std::int64_t input_res() const { return images.dim(2); }
    std::int64_t gt_res() const { return masks.height; }

    /// Gathers samples into a new batch, in the given order.
    Dataset subset(const std::vector<std::int64_t>& indices) const;
    Tensor image_batch(const std::vector<std::int64_t>& indices) const;
    Mask mask_batch(const std::vector<std::int64_t>& indices) const;
};

/// Pure function of the spec; sample i draws from its own derived stream.
Dataset generate(const DatasetSpec& spec);

/// First part trains, the trailing round(n * val_fraction) samples validate.
std::pair<Dataset, Dataset> split(const Dataset& data, double val_fraction = 1.0 / 3.0);

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace upseg
