#include "lixelkit/diffcore/graph.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

namespace lixelkit::diff {

Graph Graph::trace(const Tensor& root) {
    Graph g(root);
    if (!root.defined()) throw Error("graph: undefined root tensor");
    std::unordered_set<Node*> visited;
    // Iterative post-order DFS; (node, next input index) frames.
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            g.nodes_.push_back(node);
            stack.pop_back();
        }
    }
    return g;
}

void Graph::backward() {
    Node* root = root_.node();
    for (Node* n : nodes_) {
        if (!n->is_leaf() && n->has_grad) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
    auto seed = root->grad_buffer();
    for (auto& s : seed) s += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->has_grad) n->backward(*n);
    }
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw Error("backward: undefined loss");
    if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
    if (!loss.requires_grad()) return;
    Graph::trace(loss).backward();
}

}  // namespace lixelkit::diff
