#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gsvit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    // Empty until a gradient is first accumulated.
    std::vector<T> grad;
    bool requires_grad = false;
};

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

// Zero-filled gradient buffer for `node`, allocated on first use.
template <typename T>
std::vector<T>& grad_buffer(TensorNode<T>& node) {
    if (node.grad.empty()) {
        node.grad.assign(node.data.size(), T(0));
    }
    return node.grad;
}

}  // namespace detail

// Row-major contiguous n-d array. Copies share storage; `clone` and `detach`
// produce independent storage. Rank-0 tensors hold a single scalar.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

    static BasicTensor zeros(Shape shape, bool requires_grad = false);
    static BasicTensor ones(Shape shape, bool requires_grad = false);
    static BasicTensor full(Shape shape, T value, bool requires_grad = false);
    static BasicTensor scalar(T value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const T> data() const { return node_->data; }
    // Writable view for parameter updates and initialisation. Callers must
    // own the tensor exclusively while writing.
    std::span<T> mutable_data() { return node_->data; }
    T operator[](std::size_t flat_index) const { return node_->data[flat_index]; }
    T item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool value);
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    BasicTensor grad_tensor() const;
    void zero_grad() { node_->grad.clear(); }

    BasicTensor clone() const;
    BasicTensor detach() const { return clone(); }

    const detail::NodePtr<T>& node() const { return node_; }
    static BasicTensor from_node(detail::NodePtr<T> node);

private:
    detail::NodePtr<T> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Records differentiable ops executed on the calling thread while a
// TapeScope is active. One tape belongs to one training step.
template <typename T>
class Tape {
public:
    struct Node {
        std::string_view op;
        std::vector<detail::NodePtr<T>> inputs;
        detail::NodePtr<T> output;
        // Reads output->grad and accumulates into inputs that require grad.
        std::function<void(const detail::TensorNode<T>& output)> backward;
    };

    void record(Node node);
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    const std::vector<Node>& nodes() const { return nodes_; }

    // Populates leaf gradients with d(loss)/d(leaf) by visiting nodes in
    // exact reverse recording order, then clears the tape.
    void backward(const BasicTensor<T>& loss);
    void clear() { nodes_.clear(); }

    // Tape active on the calling thread, or nullptr when ops run untraced.
    static Tape* active();

private:
    template <typename>
    friend class TapeScope;
    static Tape*& active_slot();

    std::vector<Node> nodes_;
};

template <typename T>
class TapeScope {
public:
    explicit TapeScope(Tape<T>& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape<T>* previous_;
};

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template class TapeScope<float>;
extern template class TapeScope<double>;

}  // namespace gsvit
