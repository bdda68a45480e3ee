#include "upseg/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "upseg/errors.hpp"
#include "upseg/resample.hpp"
#include "upseg/rng.hpp"
#include "upseg/tensor_file.hpp"

namespace upseg {

ShapeFamily parse_shape_family(const std::string& name) {
    if (name == "ellipses") return ShapeFamily::Ellipses;
    if (name == "blobs") return ShapeFamily::Blobs;
    throw ConfigError("unknown shape family '" + name + "' (expected ellipses or blobs)");
}

std::string shape_family_name(ShapeFamily family) {
    return family == ShapeFamily::Ellipses ? "ellipses" : "blobs";
}

void DatasetSpec::validate() const {
    if (num_samples < 1) throw ConfigError("data.num_samples must be >= 1");
    if (input_res < 1 || gt_res < input_res || gt_res % input_res != 0 ||
        !std::has_single_bit(static_cast<unsigned>(gt_res / input_res))) {
        throw ConfigError("data.gt_res / data.input_res must be a power of two");
    }
    if (num_classes < 1 || num_classes > 255) throw ConfigError("data.num_classes must be in [1, 255]");
    if (!(noise_level >= 0.0)) throw ConfigError("data.noise_level must be >= 0");
    if (min_shapes < 0 || max_shapes < min_shapes) {
        throw ConfigError("data.min_shapes / data.max_shapes out of order");
    }
}

namespace {

constexpr double kBackground = 0.25;

double class_intensity(int label, int max_label) {
    return kBackground + 0.5 * static_cast<double>(label) / static_cast<double>(max_label);
}

// Ellipse whose radius wobbles sinusoidally with the polar angle, so the
// boundary carries detail finer than one input pixel.
void draw_ellipse(Rng& rng, int res, std::uint8_t label, double intensity, std::uint8_t* mask,
                  double* image) {
    const double cx = rng.uniform(0.2, 0.8) * res;
    const double cy = rng.uniform(0.2, 0.8) * res;
    const double a = rng.uniform(0.09, 0.22) * res;
    const double b = rng.uniform(0.09, 0.22) * res;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double amp = rng.uniform(0.04, 0.12);
    const double freq = static_cast<double>(3 + rng.below(5));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double reach = std::max(a, b) * (1.0 + amp) + 1.0;
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(res - 1, static_cast<int>(std::ceil(cy + reach)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(res - 1, static_cast<int>(std::ceil(cx + reach)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double u = (dx * ct + dy * st) / a;
            const double v = (-dx * st + dy * ct) / b;
            const double r = 1.0 + amp * std::sin(freq * std::atan2(v, u) + phase);
            if (u * u + v * v < r * r) {
                mask[y * res + x] = label;
                image[y * res + x] = intensity;
            }
        }
    }
}

// Metaball cluster: three Gaussian bumps thresholded at 0.5.
void draw_blob(Rng& rng, int res, std::uint8_t label, double intensity, std::uint8_t* mask,
               double* image) {
    const double cx = rng.uniform(0.25, 0.75) * res;
    const double cy = rng.uniform(0.25, 0.75) * res;
    struct Bump {
        double x, y, inv2s2;
    };
    Bump bumps[3];
    double reach = 0.0;
    for (auto& bump : bumps) {
        const double sigma = rng.uniform(0.05, 0.1) * res;
        bump.x = cx + rng.uniform(-0.1, 0.1) * res;
        bump.y = cy + rng.uniform(-0.1, 0.1) * res;
        bump.inv2s2 = 1.0 / (2.0 * sigma * sigma);
        reach = std::max(reach, 0.1 * res + 2.5 * sigma);
    }
    const int y0 = std::max(0, static_cast<int>(cy - reach));
    const int y1 = std::min(res - 1, static_cast<int>(cy + reach) + 1);
    const int x0 = std::max(0, static_cast<int>(cx - reach));
    const int x1 = std::min(res - 1, static_cast<int>(cx + reach) + 1);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double f = 0.0;
            for (const auto& bump : bumps) {
                const double dx = x + 0.5 - bump.x, dy = y + 0.5 - bump.y;
                f += std::exp(-(dx * dx + dy * dy) * bump.inv2s2);
            }
            if (f > 0.5) {
                mask[y * res + x] = label;
                image[y * res + x] = intensity;
            }
        }
    }
}

}  // namespace

Dataset generate(const DatasetSpec& spec) {
    spec.validate();
    const int res = spec.gt_res;
    const int factor = spec.gt_res / spec.input_res;
    const std::int64_t in_px = static_cast<std::int64_t>(spec.input_res) * spec.input_res;
    const std::int64_t gt_px = static_cast<std::int64_t>(res) * res;
    const int max_label = spec.num_classes == 1 ? 1 : spec.num_classes - 1;

    Dataset out;
    out.num_classes = spec.num_classes;
    out.masks = Mask(spec.num_samples, res, res);
    std::vector<double> images(static_cast<std::size_t>(spec.num_samples * in_px));
    std::vector<double> canvas(static_cast<std::size_t>(gt_px));
    for (std::int64_t i = 0; i < spec.num_samples; ++i) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
        std::fill(canvas.begin(), canvas.end(), kBackground);
        std::uint8_t* mask = out.masks.labels.data() + i * gt_px;
        const auto count = spec.min_shapes +
                           static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_shapes - spec.min_shapes + 1)));
        for (int s = 0; s < count; ++s) {
            const auto label = static_cast<std::uint8_t>(
                spec.num_classes <= 2 ? 1 : 1 + rng.below(static_cast<std::uint64_t>(max_label)));
            const double intensity = class_intensity(label, max_label);
            if (spec.shape_family == ShapeFamily::Ellipses) {
                draw_ellipse(rng, res, label, intensity, mask, canvas.data());
            } else {
                draw_blob(rng, res, label, intensity, mask, canvas.data());
            }
        }
        auto small = downscale_image(Tensor::from_data({1, 1, res, res}, canvas), factor);
        auto src = small.data();
        double* dst = images.data() + i * in_px;
        for (std::int64_t p = 0; p < in_px; ++p) {
            double v = src[static_cast<std::size_t>(p)];
            if (spec.noise_level > 0.0) v += spec.noise_level * rng.normal();
            dst[p] = std::clamp(v, 0.0, 1.0);
        }
    }
    out.images = Tensor::from_data({spec.num_samples, 1, spec.input_res, spec.input_res},
                                   std::move(images));
    return out;
}

Tensor Dataset::image_batch(const std::vector<std::int64_t>& indices) const {
    const std::int64_t c = images.dim(1), h = images.dim(2), w = images.dim(3);
    const std::int64_t per = c * h * w;
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(per) * indices.size());
    auto src = images.data();
    for (auto i : indices) {
        if (i < 0 || i >= images.dim(0)) throw ShapeError("sample index out of range");
        auto first = src.begin() + i * per;
        data.insert(data.end(), first, first + per);
    }
    return Tensor::from_data({static_cast<std::int64_t>(indices.size()), c, h, w}, std::move(data));
}

Mask Dataset::mask_batch(const std::vector<std::int64_t>& indices) const {
    Mask out(static_cast<std::int64_t>(indices.size()), masks.height, masks.width);
    const std::int64_t per = masks.pixels_per_item();
    auto dst = out.labels.begin();
    for (auto i : indices) {
        if (i < 0 || i >= masks.batch) throw ShapeError("sample index out of range");
        auto first = masks.labels.begin() + i * per;
        dst = std::copy(first, first + per, dst);
    }
    return out;
}

Dataset Dataset::subset(const std::vector<std::int64_t>& indices) const {
    if (indices.empty()) throw ShapeError("empty dataset subset");
    Dataset out;
    out.num_classes = num_classes;
    out.images = image_batch(indices);
    out.masks = mask_batch(indices);
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double val_fraction) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("validation fraction must lie in (0, 1)");
    }
    const std::int64_t n = data.size();
    const auto n_val = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * val_fraction));
    if (n_val < 1 || n_val >= n) throw ConfigError("dataset too small to split");
    std::vector<std::int64_t> train_idx, val_idx;
    for (std::int64_t i = 0; i < n; ++i) (i < n - n_val ? train_idx : val_idx).push_back(i);
    return {data.subset(train_idx), data.subset(val_idx)};
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    Tensor classes = Tensor::from_data({1}, {static_cast<double>(data.num_classes)});
    write_tensor_file(path, {to_record("images", data.images, DType::F64),
                             to_record("masks", data.masks),
                             to_record("num_classes", classes, DType::U8)});
}

Dataset load_dataset(const std::filesystem::path& path) {
    auto records = read_tensor_file(path);
    Dataset d;
    d.images = to_tensor(find_record(records, "images"));
    d.masks = to_mask(find_record(records, "masks"));
    d.num_classes = static_cast<int>(to_tensor(find_record(records, "num_classes")).data()[0]);
    if (d.images.rank() != 4 || d.images.dim(0) != d.masks.batch) {
        throw FormatError("dataset images and masks disagree on sample count");
    }
    return d;
}

}  // namespace upseg
