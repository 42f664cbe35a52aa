#pragma once

// Internal helpers shared by the op implementations.

#include <initializer_list>
#include <string_view>
#include <utility>
#include <vector>

#include "gsvit/error.hpp"
#include "gsvit/tensor.hpp"

namespace gsvit::detail {

template <typename T>
bool should_record(std::initializer_list<const BasicTensor<T>*> inputs) {
    if (Tape<T>::active() == nullptr) {
        return false;
    }
    for (const auto* t : inputs) {
        if (t != nullptr && t->defined() && t->requires_grad()) {
            return true;
        }
    }
    return false;
}

// Wraps forward results in a tensor and, when `record` is set, registers the
// backward rule on the active tape. `backward` receives the output node.
template <typename T, typename Backward>
BasicTensor<T> emit(std::string_view op, Shape shape, std::vector<T> data, std::vector<NodePtr<T>> inputs,
                    bool record, Backward&& backward) {
    BasicTensor<T> out(std::move(shape), std::move(data));
    if (record) {
        out.node()->requires_grad = true;
        Tape<T>::active()->record(
            {op, std::move(inputs), out.node(), std::forward<Backward>(backward)});
    }
    return out;
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ShapeError(message);
    }
}

// C[m x n] = A[m x k] * B[k x n] (or += when accumulate is set). Row-major.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (!accumulate) {
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] = T(0);
            }
        }
        const T* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

template <typename T>
std::vector<T> transposed(const T* src, std::size_t rows, std::size_t cols) {
    std::vector<T> dst(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
    return dst;
}

}  // namespace gsvit::detail
