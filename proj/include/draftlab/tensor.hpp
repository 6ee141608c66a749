#pragma once

#include "draftlab/common.hpp"
#include "draftlab/error.hpp"
#include "draftlab/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace draft {

// Node of the reverse-mode autodiff graph. Ops allocate a fresh node for
// their result and wire parents plus a closure that pushes gradient back to
// them, but only when some parent actually requires gradient; pure inference
// builds no graph at all. Gradients accumulate across backward calls until
// zero_grad, which is what lets one step sum losses from several utterances.
struct Tensor {
    std::vector<int> shape;  // empty = scalar
    std::vector<real> data;
    std::vector<real> grad;  // empty until ensure_grad()
    bool requires_grad = false;
    std::string op_name;  // creating op, empty for leaves
    std::vector<std::shared_ptr<Tensor>> parents;
    std::function<void()> backward_fn;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }

    int rank() const { return static_cast<int>(shape.size()); }

    int rows() const {
        check(rank() == 2, ErrorCode::kRank, "rows() needs a rank-2 tensor");
        return shape[0];
    }

    int cols() const {
        check(rank() == 2, ErrorCode::kRank, "cols() needs a rank-2 tensor");
        return shape[1];
    }

    real& at(int i, int j) {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }

    real at(int i, int j) const {
        return data[static_cast<std::size_t>(i) * shape[1] + j];
    }

    real scalar() const {
        check(numel() == 1, ErrorCode::kDimension,
              "scalar() on a tensor with " + std::to_string(numel()) +
                  " elements");
        return data[0];
    }

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), real(0));
    }

    real* grad_data() {
        ensure_grad();
        return grad.data();
    }

    void zero_grad() {
        for (auto& g : grad) g = 0;
    }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false);
TensorPtr make_tensor(std::vector<int> shape, std::vector<real> values,
                      bool requires_grad = false);
TensorPtr make_scalar(real value);
TensorPtr full(std::vector<int> shape, real value, bool requires_grad = false);
TensorPtr randn(Rng& rng, std::vector<int> shape, double stddev,
                bool requires_grad = false);

// Runs the closures of every node reachable from root in reverse topological
// order, seeding root's gradient with 1. Root must be a scalar. Gradients
// add into whatever the buffers already hold.
void backward(const TensorPtr& root);

// Clears gradients of every node reachable from root.
void zero_grad_graph(const TensorPtr& root);

}  // namespace draft
