#pragma once

#include <cstdint>
#include <vector>

namespace upseg {

/// Batch of class-index label maps, N x H x W, row-major.
struct Mask {
    std::int64_t batch = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<std::uint8_t> labels;

    Mask() = default;
    Mask(std::int64_t n, std::int64_t h, std::int64_t w, std::uint8_t fill = 0)
        : batch(n), height(h), width(w),
          labels(static_cast<std::size_t>(n * h * w), fill) {}

    std::int64_t pixels_per_item() const { return height * width; }
    std::size_t size() const { return labels.size(); }

    std::uint8_t& at(std::int64_t n, std::int64_t y, std::int64_t x) {
        return labels[static_cast<std::size_t>((n * height + y) * width + x)];
    }
    std::uint8_t at(std::int64_t n, std::int64_t y, std::int64_t x) const {
        return labels[static_cast<std::size_t>((n * height + y) * width + x)];
    }

    /// Copy of the single item n as a batch of one.
    Mask item(std::int64_t n) const;
    static Mask stack(const std::vector<const Mask*>& items);

    bool operator==(const Mask&) const = default;
};

}  // namespace upseg
