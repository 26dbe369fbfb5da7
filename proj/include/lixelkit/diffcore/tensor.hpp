#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lixelkit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when operand extents are incompatible. The message names the op.
class ShapeError : public Error {
public:
    using Error::Error;
};

namespace diff {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;

/// Backward rule of a recorded operation. Reads `self.grad` and accumulates
/// into the gradients of `self.inputs`.
using BackwardFn = std::function<void(Node& self)>;

/// One vertex of the define-by-run graph. Leaves have no inputs.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn backward;
    const char* op = "leaf";

    bool is_leaf() const { return inputs.empty(); }

    /// Gradient buffer of this node, allocated (zero-filled) on first use.
    std::span<double> grad_buffer();
};

/// Handle to a node. Copies share the same storage.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim() const { return shape().size(); }
    std::size_t numel() const;
    /// Extent of `axis`; negative axes count from the back.
    std::size_t size(int axis) const;

    std::span<const double> data() const;
    /// Writable storage. Only meaningful for leaves (parameters, inputs).
    std::span<double> mutable_data();
    double operator[](std::size_t flat) const { return data()[flat]; }
    double item() const;
    std::vector<double> to_vector() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    bool is_leaf() const;
    const char* op_name() const;

    /// New leaf sharing no history with this tensor (gradient stop).
    Tensor detach() const;
    /// Deep copy of the values into a fresh leaf.
    Tensor clone() const;

    void backward() const;

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& shared() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Records an operation result. `fn` is attached only if some input needs
/// gradients; otherwise the result is a constant leaf.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn fn);

/// Gradient accumulation target for input `i` of `self`, or an empty span
/// when that input does not require gradients.
std::span<double> input_grad(Node& self, std::size_t i);

}  // namespace diff
}  // namespace lixelkit
