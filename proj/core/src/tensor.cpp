#include "gsvit/tensor.hpp"

#include <sstream>

#include "gsvit/error.hpp"

namespace gsvit {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out << 'x';
        }
        out << shape[i];
    }
    out << ']';
    return out.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode<T>>()) {
    for (std::size_t d : shape) {
        if (d == 0) {
            throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
        }
    }
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(data.size()));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::ones(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(1), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return BasicTensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
    return BasicTensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T BasicTensor<T>::item() const {
    if (numel() != 1) {
        throw ShapeError("item() requires a single-element tensor, got " + shape_to_string(shape()));
    }
    return node_->data[0];
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool value) {
    node_->requires_grad = value;
    if (!value) {
        node_->grad.clear();
    }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::grad_tensor() const {
    if (!has_grad()) {
        return zeros(shape());
    }
    return BasicTensor(shape(), node_->grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
    return BasicTensor(shape(), node_->data);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_node(detail::NodePtr<T> node) {
    BasicTensor t;
    t.node_ = std::move(node);
    return t;
}

template <typename T>
Tape<T>*& Tape<T>::active_slot() {
    static thread_local Tape<T>* slot = nullptr;
    return slot;
}

template <typename T>
Tape<T>* Tape<T>::active() {
    return active_slot();
}

template <typename T>
void Tape<T>::record(Node node) {
    nodes_.push_back(std::move(node));
}

template <typename T>
void Tape<T>::backward(const BasicTensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError("backward() needs a scalar loss, got " +
                         (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
    }
    if (nodes_.empty()) {
        throw Error("backward() called on an empty tape");
    }
    if (!loss.requires_grad()) {
        throw Error("backward(): loss was not produced by a recorded op");
    }
    auto& seed = detail::grad_buffer(*loss.node());
    seed[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) {
            continue;  // not on a path to the loss
        }
        it->backward(*it->output);
    }
    // Intermediate results die with the tape; only leaves keep their grads.
    for (auto& node : nodes_) {
        node.output->grad.clear();
        node.output->grad.shrink_to_fit();
    }
    nodes_.clear();
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(Tape<T>::active_slot()) {
    Tape<T>::active_slot() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
    Tape<T>::active_slot() = previous_;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;

}  // namespace gsvit
