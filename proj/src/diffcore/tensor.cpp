#include "lixelkit/diffcore/tensor.hpp"

#include <algorithm>
#include <cstdlib>
#include <new>
#include <sstream>

#include "lixelkit/diffcore/graph.hpp"

// Every heap block starts on a 64-byte boundary. Eigen's vectorized
// reductions start at the first aligned element, so with glibc's 16-byte
// blocks the summation order (and the last bits of every result) would
// depend on where the allocator happened to place a buffer. A fixed
// alignment makes results a function of the inputs alone, which resumed
// runs and repeated experiments rely on. Memory from aligned_alloc is
// released by the default operator delete (free).
void* operator new(std::size_t size) {
    constexpr std::size_t kAlign = 64;
    const std::size_t rounded = size == 0 ? kAlign : (size + kAlign - 1) / kAlign * kAlign;
    for (;;) {
        if (void* p = std::aligned_alloc(kAlign, rounded)) return p;
        auto handler = std::get_new_handler();
        if (!handler) throw std::bad_alloc();
        handler();
    }
}

namespace lixelkit::diff {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::span<double> Node::grad_buffer() {
    if (!has_grad) {
        grad.assign(value.size(), 0.0);
        has_grad = true;
    }
    return grad;
}

namespace {

void check_shape(const Shape& shape) {
    for (auto e : shape) {
        if (e == 0) throw ShapeError("tensor: zero extent in shape " + to_string(shape));
    }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape(shape);
    std::vector<double> v(diff::numel(shape), value);
    return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    check_shape(shape);
    if (diff::numel(shape) != values.size()) {
        throw ShapeError("tensor: shape " + to_string(shape) + " holds " + std::to_string(diff::numel(shape)) +
                         " elements, got " + std::to_string(values.size()));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::size(int axis) const {
    const int d = static_cast<int>(dim());
    const int a = axis < 0 ? axis + d : axis;
    if (a < 0 || a >= d) throw ShapeError("size: axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
    return shape()[static_cast<std::size_t>(a)];
}

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor " + to_string(shape()) + " is not a scalar");
    return node_->value[0];
}

std::vector<double> Tensor::to_vector() const { return node_->value; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
}

bool Tensor::has_grad() const { return node_->has_grad; }

std::span<const double> Tensor::grad() const {
    if (!node_->has_grad) throw Error(std::string("grad: no gradient recorded for ") + node_->op + " tensor");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() {
    if (node_->has_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::is_leaf() const { return node_->is_leaf(); }
const char* Tensor::op_name() const { return node_->op; }

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

Tensor Tensor::clone() const { return from(node_->shape, node_->value, node_->requires_grad); }

void Tensor::backward() const { diff::backward(*this); }

Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   BackwardFn fn) {
    auto node = std::make_shared<Node>();
    node->op = op;
    node->shape = std::move(shape);
    node->value = std::move(value);
    const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& t : inputs) node->inputs.push_back(t.shared());
        node->backward = std::move(fn);
    }
    return Tensor(std::move(node));
}

std::span<double> input_grad(Node& self, std::size_t i) {
    Node& in = *self.inputs[i];
    if (!in.requires_grad) return {};
    return in.grad_buffer();
}

}  // namespace lixelkit::diff
