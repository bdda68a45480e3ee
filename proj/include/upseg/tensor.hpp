#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace upseg {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One value in the autodiff graph. Forward data is written once by the op that
// creates the node; only leaves (parameters) are ever mutated afterwards, and
// only by the optimizer.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a gradient flows in
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad and accumulates into parents' grads.
    std::function<void(Node&)> backward;

    std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major tensor of doubles with reverse-mode autodiff.
///
/// Copies are shallow: two Tensor handles may refer to the same node. Image
/// tensors use the N x C x H x W layout throughout the library.
class Tensor {
public:
    Tensor();

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor from_data(const Shape& shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value);

    const Shape& shape() const;
    std::int64_t dim(std::size_t axis) const;
    std::size_t rank() const;
    std::int64_t numel() const;
    bool defined() const { return node_ != nullptr; }

    std::span<const double> data() const;
    double item() const;
    double at(std::initializer_list<std::int64_t> index) const;

    bool requires_grad() const;
    bool has_grad() const;
    /// Gradient accumulated by backward(); zeros when nothing flowed here.
    Tensor grad() const;
    std::span<const double> grad_data() const;
    void zero_grad();

    /// Writable view of a leaf's values. Throws UsageError on interior nodes,
    /// whose values are frozen once created.
    std::span<double> mutable_data();

    /// Fresh leaf holding a copy of the values, cut from the graph.
    Tensor detach(bool requires_grad = false) const;
    Tensor clone() const;

    bool is_leaf() const;
    bool all_finite() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node);

private:
    std::shared_ptr<detail::Node> node_;
};

/// Propagates d(loss)/d(x) into every requires_grad tensor reachable from loss.
/// Gradients accumulate into leaves; call zero_grad() between steps.
void backward(const Tensor& loss);

/// Builds an interior node. Used by operator implementations.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn);

}  // namespace upseg
