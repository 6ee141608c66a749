#include "draftlab/tensor.hpp"

#include <unordered_set>

namespace draft {

namespace {

void validate_shape(const std::vector<int>& shape) {
    for (int d : shape)
        check(d > 0, ErrorCode::kDimension,
              "tensor dimensions must be positive, got " + std::to_string(d));
}

// Iterative post-order DFS; the graphs here can be thousands of nodes deep
// (one per op per frame), which would overflow the stack if done recursively.
std::vector<Tensor*> topo_order(Tensor* root) {
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<Tensor*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Tensor* parent = node->parents[next_child++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad) {
    validate_shape(shape);
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data.assign(static_cast<std::size_t>(t->numel()), real(0));
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_tensor(std::vector<int> shape, std::vector<real> values,
                      bool requires_grad) {
    validate_shape(shape);
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    check(static_cast<std::int64_t>(values.size()) == t->numel(),
          ErrorCode::kDimension,
          "value count " + std::to_string(values.size()) +
              " does not match tensor size " + std::to_string(t->numel()));
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_scalar(real value) {
    auto t = std::make_shared<Tensor>();
    t->data.assign(1, value);
    return t;
}

TensorPtr full(std::vector<int> shape, real value, bool requires_grad) {
    auto t = make_tensor(std::move(shape), requires_grad);
    for (auto& v : t->data) v = value;
    return t;
}

TensorPtr randn(Rng& rng, std::vector<int> shape, double stddev,
                bool requires_grad) {
    auto t = make_tensor(std::move(shape), requires_grad);
    for (auto& v : t->data) v = static_cast<real>(stddev * rng.normal());
    return t;
}

void backward(const TensorPtr& root) {
    check(root != nullptr, ErrorCode::kState, "backward on a null tensor");
    check(root->numel() == 1, ErrorCode::kState,
          "backward starts from a scalar, got a tensor with " +
              std::to_string(root->numel()) + " elements");
    auto order = topo_order(root.get());
    // Interior nodes (anything an op produced) carry scratch gradients that
    // must start from zero each pass; leaves keep accumulating so one
    // optimizer step can sum losses over several backward calls.
    for (Tensor* node : order)
        if (node->backward_fn) node->zero_grad();
    root->ensure_grad();
    root->grad[0] += real(1);
    // Post-order puts root last, so walking backwards gives parents their
    // full gradient before their own closure runs.
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn();
}

void zero_grad_graph(const TensorPtr& root) {
    if (!root) return;
    for (Tensor* node : topo_order(root.get())) node->zero_grad();
}

}  // namespace draft
