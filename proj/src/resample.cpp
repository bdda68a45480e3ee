#include "upseg/resample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "upseg/errors.hpp"

namespace upseg {

Mask downscale_mask(const Mask& mask, int factor) {
    if (factor < 1 || mask.height % factor != 0 || mask.width % factor != 0) {
        throw ShapeError("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " is not divisible by factor " + std::to_string(factor));
    }
    if (factor == 1) return mask;
    Mask out(mask.batch, mask.height / factor, mask.width / factor);
    for (std::int64_t n = 0; n < out.batch; ++n)
        for (std::int64_t y = 0; y < out.height; ++y)
            for (std::int64_t x = 0; x < out.width; ++x)
                out.at(n, y, x) = mask.at(n, y * factor, x * factor);
    return out;
}

Tensor downscale_image(const Tensor& image, int factor) {
    if (image.rank() != 4) throw ShapeError("downscale_image expects N x C x H x W");
    const auto n = image.dim(0), c = image.dim(1), h = image.dim(2), w = image.dim(3);
    if (factor < 1 || h % factor != 0 || w % factor != 0) {
        throw ShapeError("image " + shape_to_string(image.shape()) +
                         " is not divisible by factor " + std::to_string(factor));
    }
    if (factor == 1) return image.detach();
    const std::int64_t ho = h / factor, wo = w / factor;
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    auto x = image.data();
    std::vector<double> out(static_cast<std::size_t>(n * c * ho * wo));
    for (std::int64_t plane = 0; plane < n * c; ++plane) {
        for (std::int64_t oy = 0; oy < ho; ++oy) {
            for (std::int64_t ox = 0; ox < wo; ++ox) {
                double acc = 0.0;
                for (std::int64_t ky = 0; ky < factor; ++ky)
                    for (std::int64_t kx = 0; kx < factor; ++kx)
                        acc += x[static_cast<std::size_t>((plane * h + oy * factor + ky) * w +
                                                          ox * factor + kx)];
                out[static_cast<std::size_t>((plane * ho + oy) * wo + ox)] = acc * inv;
            }
        }
    }
    return Tensor::from_data({n, c, ho, wo}, std::move(out));
}

namespace {

struct Tap {
    std::int64_t lo;
    std::int64_t hi;
    double frac;
};

std::vector<Tap> taps_for(std::int64_t in, std::int64_t out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::int64_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        auto lo = static_cast<std::int64_t>(std::floor(src));
        auto hi = std::min(lo + 1, in - 1);
        taps[static_cast<std::size_t>(o)] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
}

}  // namespace

std::vector<double> bilinear_resize(std::span<const double> plane, std::int64_t height,
                                    std::int64_t width, std::int64_t out_height,
                                    std::int64_t out_width) {
    if (height < 1 || width < 1 || out_height < 1 || out_width < 1) {
        throw ShapeError("bilinear_resize extents must be positive");
    }
    if (static_cast<std::int64_t>(plane.size()) != height * width) {
        throw ShapeError("bilinear_resize plane length does not match its extents");
    }
    const auto ys = taps_for(height, out_height);
    const auto xs = taps_for(width, out_width);
    std::vector<double> out(static_cast<std::size_t>(out_height * out_width));
    for (std::int64_t oy = 0; oy < out_height; ++oy) {
        const Tap& ty = ys[static_cast<std::size_t>(oy)];
        const double* r0 = plane.data() + ty.lo * width;
        const double* r1 = plane.data() + ty.hi * width;
        for (std::int64_t ox = 0; ox < out_width; ++ox) {
            const Tap& tx = xs[static_cast<std::size_t>(ox)];
            const double top = r0[tx.lo] + tx.frac * (r0[tx.hi] - r0[tx.lo]);
            const double bottom = r1[tx.lo] + tx.frac * (r1[tx.hi] - r1[tx.lo]);
            out[static_cast<std::size_t>(oy * out_width + ox)] = top + ty.frac * (bottom - top);
        }
    }
    return out;
}

}  // namespace upseg
