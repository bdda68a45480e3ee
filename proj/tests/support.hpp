#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "upseg/mask.hpp"
#include "upseg/ops.hpp"
#include "upseg/rng.hpp"
#include "upseg/tensor.hpp"

namespace upseg::test {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_data(shape, std::move(v), requires_grad);
}

inline Mask random_mask(std::int64_t n, std::int64_t h, std::int64_t w, int labels, Rng& rng) {
    Mask m(n, h, w);
    for (auto& x : m.labels) x = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(labels)));
    return m;
}

/// Projects a tensor onto a scalar with fixed random weights so every output
/// element carries a distinct upstream gradient.
inline Tensor probe(const Tensor& t, std::uint64_t seed = 99) {
    Rng rng(seed);
    return weighted_sum(t, random_tensor(t.shape(), rng));
}

/// Worst |analytic - central difference| / max(1, |central difference|) over
/// every scalar of every leaf. `f` must rebuild the graph from the leaves.
inline double gradient_error(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                             double step = 1e-5) {
    for (auto& t : leaves) t.zero_grad();
    backward(f());
    double worst = 0.0;
    for (auto& t : leaves) {
        const Tensor g = t.grad();
        std::vector<double> analytic(g.data().begin(), g.data().end());
        auto values = t.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = f().item();
            values[i] = saved - step;
            const double down = f().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
        }
    }
    return worst;
}

}  // namespace upseg::test
