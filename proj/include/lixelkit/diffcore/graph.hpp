#pragma once

#include <span>
#include <vector>

#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::diff {

/// Topologically ordered view of the operations reachable from a root
/// tensor. Inputs always precede their consumers.
class Graph {
public:
    static Graph trace(const Tensor& root);

    std::span<Node* const> nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(root)/d(root) = 1 and runs every backward rule once, in
    /// reverse order. Leaf gradients accumulate across calls; intermediate
    /// gradients are reset first.
    void backward();

private:
    explicit Graph(Tensor root) : root_(std::move(root)) {}
    Tensor root_;
    std::vector<Node*> nodes_;
};

/// Reverse-mode differentiation of a scalar loss.
void backward(const Tensor& loss);

}  // namespace lixelkit::diff
