// Element-wise arithmetic, shape manipulation and reductions.

#include <algorithm>

#include "gsvit/ops.hpp"
#include "op_support.hpp"

namespace gsvit::ops {

using detail::emit;
using detail::grad_buffer;
using detail::NodePtr;
using detail::require;
using detail::should_record;

namespace {

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("cannot broadcast " + shape_to_string(a) + " with " + shape_to_string(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

// For every flat index of `out`, the flat index into a tensor of shape `in`
// that broadcasts to it. Empty when the shapes are identical.
std::vector<std::size_t> broadcast_map(const Shape& in, const Shape& out) {
    if (in == out) {
        return {};
    }
    const std::size_t rank = out.size();
    const std::size_t offset = rank - in.size();
    std::vector<std::size_t> in_stride(rank, 0);
    std::size_t stride = 1;
    for (std::size_t i = in.size(); i-- > 0;) {
        in_stride[i + offset] = in[i] == 1 ? 0 : stride;
        stride *= in[i];
    }
    const std::size_t n = shape_numel(out);
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> counter(rank, 0);
    std::size_t idx = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        map[flat] = idx;
        for (std::size_t d = rank; d-- > 0;) {
            ++counter[d];
            idx += in_stride[d];
            if (counter[d] < out[d]) {
                break;
            }
            idx -= in_stride[d] * counter[d];
            counter[d] = 0;
        }
    }
    return map;
}

template <typename T, typename Forward, typename GradA, typename GradB>
BasicTensor<T> binary(std::string_view name, const BasicTensor<T>& a, const BasicTensor<T>& b, Forward fwd,
                      GradA grad_a, GradB grad_b) {
    Shape out_shape = broadcast_shape(a.shape(), b.shape());
    auto map_a = broadcast_map(a.shape(), out_shape);
    auto map_b = broadcast_map(b.shape(), out_shape);
    const std::size_t n = shape_numel(out_shape);
    const auto ad = a.data();
    const auto bd = b.data();
    std::vector<T> out(n);
    if (map_a.empty() && map_b.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = fwd(ad[i], bd[i]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ia = map_a.empty() ? i : map_a[i];
            const std::size_t ib = map_b.empty() ? i : map_b[i];
            out[i] = fwd(ad[ia], bd[ib]);
        }
    }
    const bool record = should_record<T>({&a, &b});
    return emit<T>(name, std::move(out_shape), std::move(out), {a.node(), b.node()}, record,
                   [an = a.node(), bn = b.node(), map_a = std::move(map_a), map_b = std::move(map_b), grad_a,
                    grad_b](const detail::TensorNode<T>& o) {
                       const std::size_t n = o.grad.size();
                       if (an->requires_grad) {
                           auto& ga = grad_buffer(*an);
                           for (std::size_t i = 0; i < n; ++i) {
                               const std::size_t ia = map_a.empty() ? i : map_a[i];
                               const std::size_t ib = map_b.empty() ? i : map_b[i];
                               ga[ia] += grad_a(an->data[ia], bn->data[ib], o.grad[i]);
                           }
                       }
                       if (bn->requires_grad) {
                           auto& gb = grad_buffer(*bn);
                           for (std::size_t i = 0; i < n; ++i) {
                               const std::size_t ia = map_a.empty() ? i : map_a[i];
                               const std::size_t ib = map_b.empty() ? i : map_b[i];
                               gb[ib] += grad_b(an->data[ia], bn->data[ib], o.grad[i]);
                           }
                       }
                   });
}

// Splits a shape around `axis` into (outer, axis length, inner) extents.
struct AxisExtents {
    std::size_t outer = 1;
    std::size_t length = 1;
    std::size_t inner = 1;
};

AxisExtents axis_extents(const Shape& shape, std::size_t axis) {
    AxisExtents e;
    for (std::size_t i = 0; i < axis; ++i) {
        e.outer *= shape[i];
    }
    e.length = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) {
        e.inner *= shape[i];
    }
    return e;
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T g) { return g; }, [](T, T, T g) { return g; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T g) { return g; }, [](T, T, T g) { return -g; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T g) { return g * y; },
        [](T x, T, T g) { return g * x; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
    std::vector<T> out(a.data().begin(), a.data().end());
    for (auto& v : out) {
        v *= factor;
    }
    return emit<T>("scale", a.shape(), std::move(out), {a.node()}, should_record<T>({&a}),
                   [an = a.node(), factor](const detail::TensorNode<T>& o) {
                       auto& ga = grad_buffer(*an);
                       for (std::size_t i = 0; i < ga.size(); ++i) {
                           ga[i] += o.grad[i] * factor;
                       }
                   });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T value) {
    std::vector<T> out(a.data().begin(), a.data().end());
    for (auto& v : out) {
        v += value;
    }
    return emit<T>("add_scalar", a.shape(), std::move(out), {a.node()}, should_record<T>({&a}),
                   [an = a.node()](const detail::TensorNode<T>& o) {
                       auto& ga = grad_buffer(*an);
                       for (std::size_t i = 0; i < ga.size(); ++i) {
                           ga[i] += o.grad[i];
                       }
                   });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape) {
    require(shape_numel(shape) == a.numel(),
            "reshape: cannot view " + shape_to_string(a.shape()) + " as " + shape_to_string(shape));
    std::vector<T> out(a.data().begin(), a.data().end());
    return emit<T>("reshape", std::move(shape), std::move(out), {a.node()}, should_record<T>({&a}),
                   [an = a.node()](const detail::TensorNode<T>& o) {
                       auto& ga = grad_buffer(*an);
                       for (std::size_t i = 0; i < ga.size(); ++i) {
                           ga[i] += o.grad[i];
                       }
                   });
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
    require(a.rank() == 2, "transpose: expected a 2-d tensor, got " + shape_to_string(a.shape()));
    const std::size_t rows = a.dim(0);
    const std::size_t cols = a.dim(1);
    auto out = detail::transposed(a.data().data(), rows, cols);
    return emit<T>("transpose", Shape{cols, rows}, std::move(out), {a.node()}, should_record<T>({&a}),
                   [an = a.node(), rows, cols](const detail::TensorNode<T>& o) {
                       auto& ga = grad_buffer(*an);
                       for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < cols; ++c) {
                               ga[r * cols + c] += o.grad[c * rows + r];
                           }
                       }
                   });
}

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis) {
    require(!parts.empty(), "concat: no inputs");
    const Shape& first = parts.front().shape();
    require(axis < first.size(), "concat: axis " + std::to_string(axis) + " out of range for " +
                                     shape_to_string(first));
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        require(p.rank() == first.size(), "concat: rank mismatch " + shape_to_string(first) + " vs " +
                                              shape_to_string(p.shape()));
        for (std::size_t d = 0; d < first.size(); ++d) {
            require(d == axis || p.dim(d) == first[d],
                    "concat: shape mismatch " + shape_to_string(first) + " vs " + shape_to_string(p.shape()));
        }
        out_shape[axis] += p.dim(axis);
    }
    const AxisExtents e = axis_extents(out_shape, axis);
    std::vector<T> out(shape_numel(out_shape));
    std::vector<std::size_t> widths;
    std::vector<NodePtr<T>> inputs;
    bool record = false;
    for (const auto& p : parts) {
        widths.push_back(p.dim(axis) * e.inner);
        inputs.push_back(p.node());
        record = record || should_record<T>({&p});
    }
    const std::size_t row = e.length * e.inner;
    std::size_t col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto src = parts[k].data();
        for (std::size_t o = 0; o < e.outer; ++o) {
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * widths[k]), widths[k],
                        out.begin() + static_cast<std::ptrdiff_t>(o * row + col));
        }
        col += widths[k];
    }
    return emit<T>("concat", std::move(out_shape), std::move(out), inputs, record,
                   [inputs, widths, outer = e.outer, row](const detail::TensorNode<T>& o) {
                       std::size_t col = 0;
                       for (std::size_t k = 0; k < inputs.size(); ++k) {
                           if (inputs[k]->requires_grad) {
                               auto& g = grad_buffer(*inputs[k]);
                               for (std::size_t r = 0; r < outer; ++r) {
                                   for (std::size_t j = 0; j < widths[k]; ++j) {
                                       g[r * widths[k] + j] += o.grad[r * row + col + j];
                                   }
                               }
                           }
                           col += widths[k];
                       }
                   });
}

template <typename T>
BasicTensor<T> stack(const std::vector<BasicTensor<T>>& parts) {
    require(!parts.empty(), "stack: no inputs");
    std::vector<BasicTensor<T>> rows;
    rows.reserve(parts.size());
    for (const auto& p : parts) {
        Shape s{1};
        s.insert(s.end(), p.shape().begin(), p.shape().end());
        rows.push_back(reshape(p, std::move(s)));
    }
    return concat(rows, 0);
}

template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& a, std::size_t axis, std::size_t start, std::size_t length) {
    require(axis < a.rank(), "slice: axis out of range for " + shape_to_string(a.shape()));
    require(length > 0 && start + length <= a.dim(axis),
            "slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                ") out of bounds for axis " + std::to_string(axis) + " of " + shape_to_string(a.shape()));
    const AxisExtents e = axis_extents(a.shape(), axis);
    Shape out_shape = a.shape();
    out_shape[axis] = length;
    const std::size_t width = length * e.inner;
    const std::size_t row = e.length * e.inner;
    const std::size_t offset = start * e.inner;
    std::vector<T> out(e.outer * width);
    const auto src = a.data();
    for (std::size_t o = 0; o < e.outer; ++o) {
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * row + offset), width,
                    out.begin() + static_cast<std::ptrdiff_t>(o * width));
    }
    return emit<T>("slice", std::move(out_shape), std::move(out), {a.node()}, should_record<T>({&a}),
                   [an = a.node(), outer = e.outer, width, row, offset](const detail::TensorNode<T>& o) {
                       auto& ga = grad_buffer(*an);
                       for (std::size_t r = 0; r < outer; ++r) {
                           for (std::size_t j = 0; j < width; ++j) {
                               ga[r * row + offset + j] += o.grad[r * width + j];
                           }
                       }
                   });
}

template <typename T>
std::vector<BasicTensor<T>> split(const BasicTensor<T>& a, std::size_t axis, const std::vector<std::size_t>& sizes) {
    require(axis < a.rank(), "split: axis out of range for " + shape_to_string(a.shape()));
    std::size_t total = 0;
    for (std::size_t s : sizes) {
        total += s;
    }
    require(total == a.dim(axis), "split: sizes sum to " + std::to_string(total) + " but axis has " +
                                      std::to_string(a.dim(axis)));
    std::vector<BasicTensor<T>> out;
    std::size_t start = 0;
    for (std::size_t s : sizes) {
        out.push_back(slice(a, axis, start, s));
        start += s;
    }
    return out;
}

template <typename T>
BasicTensor<T> gather(const BasicTensor<T>& a, const std::vector<std::int64_t>& index, Shape out_shape) {
    require(shape_numel(out_shape) == index.size(),
            "gather: " + std::to_string(index.size()) + " indices for output " + shape_to_string(out_shape));
    const auto src = a.data();
    std::vector<T> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= 0) {
            require(static_cast<std::size_t>(index[i]) < src.size(),
                    "gather: index " + std::to_string(index[i]) + " out of range for " +
                        shape_to_string(a.shape()));
            out[i] = src[static_cast<std::size_t>(index[i])];
        } else {
            out[i] = T(0);
        }
    }
    return emit<T>("gather", std::move(out_shape), std::move(out), {a.node()}, should_record<T>({&a}),
                   [an = a.node(), index](const detail::TensorNode<T>& o) {
                       auto& ga = grad_buffer(*an);
                       for (std::size_t i = 0; i < index.size(); ++i) {
                           if (index[i] >= 0) {
                               ga[static_cast<std::size_t>(index[i])] += o.grad[i];
                           }
                       }
                   });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
    double acc = 0.0;
    for (T v : a.data()) {
        acc += static_cast<double>(v);
    }
    return emit<T>("sum", Shape{}, std::vector<T>{static_cast<T>(acc)}, {a.node()}, should_record<T>({&a}),
                   [an = a.node()](const detail::TensorNode<T>& o) {
                       auto& ga = grad_buffer(*an);
                       for (auto& g : ga) {
                           g += o.grad[0];
                       }
                   });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
    return scale(sum(a), static_cast<T>(1.0 / static_cast<double>(a.numel())));
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a, std::size_t axis) {
    require(axis < a.rank(), "sum: axis out of range for " + shape_to_string(a.shape()));
    const AxisExtents e = axis_extents(a.shape(), axis);
    Shape out_shape = a.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    const auto src = a.data();
    std::vector<T> out(e.outer * e.inner);
    for (std::size_t o = 0; o < e.outer; ++o) {
        for (std::size_t i = 0; i < e.inner; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < e.length; ++k) {
                acc += static_cast<double>(src[(o * e.length + k) * e.inner + i]);
            }
            out[o * e.inner + i] = static_cast<T>(acc);
        }
    }
    return emit<T>("sum_axis", std::move(out_shape), std::move(out), {a.node()}, should_record<T>({&a}),
                   [an = a.node(), e](const detail::TensorNode<T>& o) {
                       auto& ga = grad_buffer(*an);
                       for (std::size_t r = 0; r < e.outer; ++r) {
                           for (std::size_t k = 0; k < e.length; ++k) {
                               for (std::size_t i = 0; i < e.inner; ++i) {
                                   ga[(r * e.length + k) * e.inner + i] += o.grad[r * e.inner + i];
                               }
                           }
                       }
                   });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a, std::size_t axis) {
    require(axis < a.rank(), "mean: axis out of range for " + shape_to_string(a.shape()));
    return scale(sum(a, axis), static_cast<T>(1.0 / static_cast<double>(a.dim(axis))));
}

#define GSVIT_INSTANTIATE(T)                                                                               \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                             \
    template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                             \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                             \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                               \
    template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                          \
    template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                         \
    template BasicTensor<T> transpose(const BasicTensor<T>&);                                              \
    template BasicTensor<T> concat(const std::vector<BasicTensor<T>>&, std::size_t);                       \
    template BasicTensor<T> stack(const std::vector<BasicTensor<T>>&);                                     \
    template BasicTensor<T> slice(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t);           \
    template std::vector<BasicTensor<T>> split(const BasicTensor<T>&, std::size_t,                         \
                                               const std::vector<std::size_t>&);                           \
    template BasicTensor<T> gather(const BasicTensor<T>&, const std::vector<std::int64_t>&, Shape);        \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                                    \
    template BasicTensor<T> sum(const BasicTensor<T>&, std::size_t);                                       \
    template BasicTensor<T> mean(const BasicTensor<T>&);                                                   \
    template BasicTensor<T> mean(const BasicTensor<T>&, std::size_t);

GSVIT_INSTANTIATE(float)
GSVIT_INSTANTIATE(double)

#undef GSVIT_INSTANTIATE

}  // namespace gsvit::ops
