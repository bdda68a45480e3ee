#include "upseg/mask.hpp"

#include <algorithm>

#include "upseg/errors.hpp"

namespace upseg {

Mask Mask::item(std::int64_t n) const {
    if (n < 0 || n >= batch) throw ShapeError("mask item index out of range");
    Mask out(1, height, width);
    auto first = labels.begin() + static_cast<std::ptrdiff_t>(n * pixels_per_item());
    std::copy_n(first, pixels_per_item(), out.labels.begin());
    return out;
}

Mask Mask::stack(const std::vector<const Mask*>& items) {
    if (items.empty()) throw ShapeError("cannot stack an empty list of masks");
    const auto h = items.front()->height;
    const auto w = items.front()->width;
    std::int64_t n = 0;
    for (const Mask* m : items) {
        if (m->height != h || m->width != w) throw ShapeError("mask extents differ in stack");
        n += m->batch;
    }
    Mask out(n, h, w);
    auto dst = out.labels.begin();
    for (const Mask* m : items) dst = std::copy(m->labels.begin(), m->labels.end(), dst);
    return out;
}

}  // namespace upseg
