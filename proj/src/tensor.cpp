#include "upseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "upseg/errors.hpp"

namespace upseg {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_to_string(shape));
        n *= e;
    }
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    auto n = shape_numel(shape);
    return from_data(shape, std::vector<double>(static_cast<std::size_t>(n), value),
                     requires_grad);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = shape;
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
    if (axis >= node_->shape.size()) throw ShapeError("axis out of range");
    return node_->shape[axis];
}

std::size_t Tensor::rank() const { return node_->shape.size(); }

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(node_->data.size()); }

std::span<const double> Tensor::data() const { return node_->data; }

double Tensor::item() const {
    if (node_->data.size() != 1) throw UsageError("item() on a tensor with more than one element");
    return node_->data[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
    const auto& shape = node_->shape;
    if (index.size() != shape.size()) throw ShapeError("index rank mismatch");
    std::int64_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i < 0 || i >= shape[axis]) throw ShapeError("index out of range");
        flat = flat * shape[axis] + i;
        ++axis;
    }
    return node_->data[static_cast<std::size_t>(flat)];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

Tensor Tensor::grad() const {
    if (node_->grad.empty()) return zeros(node_->shape);
    return from_data(node_->shape, node_->grad);
}

std::span<const double> Tensor::grad_data() const { return node_->grad; }

void Tensor::zero_grad() {
    if (node_->requires_grad) node_->grad.assign(node_->data.size(), 0.0);
    else node_->grad.clear();
}

std::span<double> Tensor::mutable_data() {
    if (!is_leaf()) throw UsageError("values of an interior graph node are immutable");
    return node_->data;
}

Tensor Tensor::detach(bool requires_grad) const {
    return from_data(node_->shape, node_->data, requires_grad);
}

Tensor Tensor::clone() const { return detach(node_->requires_grad); }

bool Tensor::is_leaf() const { return node_->parents.empty() && !node_->backward; }

bool Tensor::all_finite() const {
    return std::all_of(node_->data.begin(), node_->data.end(),
                       [](double v) { return std::isfinite(v); });
}

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (auto& t : inputs) node->parents.push_back(t.node());
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw UsageError("backward() requires a scalar loss");
    }
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

}  // namespace upseg
