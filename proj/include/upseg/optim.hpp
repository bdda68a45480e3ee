#pragma once

#include <cstdint>
#include <vector>

#include "upseg/tensor.hpp"

namespace upseg {

/// p <- p - lr * grad(p) for every parameter tensor.
void sgd_step(std::vector<Tensor>& params, double lr);

/// Adam with bias-corrected first and second moments.
class Adam {
public:
    Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step();
    void zero_grad();
    std::int64_t steps_taken() const { return step_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double lr_, beta1_, beta2_, eps_;
    std::int64_t step_ = 0;
};

}  // namespace upseg
