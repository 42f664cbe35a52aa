// Matrix multiply, im2col convolutions and adaptive pooling.

#include "gsvit/ops.hpp"
#include "op_support.hpp"

namespace gsvit::ops {

using detail::emit;
using detail::gemm;
using detail::grad_buffer;
using detail::require;
using detail::should_record;
using detail::transposed;

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
    }
    const std::size_t m = a.dim(0);
    const std::size_t k = a.dim(1);
    const std::size_t n = b.dim(1);
    std::vector<T> out(m * n);
    gemm(a.data().data(), b.data().data(), out.data(), m, k, n, false);
    return emit<T>("matmul", Shape{m, n}, std::move(out), {a.node(), b.node()}, should_record<T>({&a, &b}),
                   [an = a.node(), bn = b.node(), m, k, n](const detail::TensorNode<T>& o) {
                       if (an->requires_grad) {
                           // dA = dC * B^T
                           auto bt = transposed(bn->data.data(), k, n);
                           gemm(o.grad.data(), bt.data(), grad_buffer(*an).data(), m, n, k, true);
                       }
                       if (bn->requires_grad) {
                           // dB = A^T * dC
                           auto at = transposed(an->data.data(), m, k);
                           gemm(at.data(), o.grad.data(), grad_buffer(*bn).data(), k, m, n, true);
                       }
                   });
}

std::size_t conv2d_output_size(std::size_t in, std::size_t kernel, Conv2dGeometry g) {
    if (g.stride == 0 || in + 2 * g.pad < kernel) {
        throw ShapeError("conv2d: kernel " + std::to_string(kernel) + " does not fit input " + std::to_string(in) +
                         " with padding " + std::to_string(g.pad));
    }
    return (in + 2 * g.pad - kernel) / g.stride + 1;
}

std::size_t conv2d_transposed_output_size(std::size_t in, std::size_t kernel, Conv2dGeometry g) {
    const std::size_t grown = (in - 1) * g.stride + kernel;
    if (g.stride == 0 || grown <= 2 * g.pad) {
        throw ShapeError("conv2d_transposed: padding " + std::to_string(g.pad) + " consumes the whole output");
    }
    return grown - 2 * g.pad;
}

namespace {

struct ConvDims {
    std::size_t channels, height, width, kernel, out_h, out_w;
    Conv2dGeometry geometry;
};

// src [C x H x W] -> cols [(C*k*k) x (out_h*out_w)]
template <typename T>
void im2col(const T* src, const ConvDims& d, T* cols) {
    const std::size_t positions = d.out_h * d.out_w;
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t ki = 0; ki < d.kernel; ++ki) {
            for (std::size_t kj = 0; kj < d.kernel; ++kj) {
                T* row = cols + ((c * d.kernel + ki) * d.kernel + kj) * positions;
                for (std::size_t oy = 0; oy < d.out_h; ++oy) {
                    const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * d.geometry.stride + ki) -
                                             static_cast<std::ptrdiff_t>(d.geometry.pad);
                    for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                        const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * d.geometry.stride + kj) -
                                                 static_cast<std::ptrdiff_t>(d.geometry.pad);
                        const bool inside = y >= 0 && x >= 0 && y < static_cast<std::ptrdiff_t>(d.height) &&
                                            x < static_cast<std::ptrdiff_t>(d.width);
                        row[oy * d.out_w + ox] =
                            inside ? src[(c * d.height + static_cast<std::size_t>(y)) * d.width +
                                         static_cast<std::size_t>(x)]
                                   : T(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds cols back into dst [C x H x W].
template <typename T>
void col2im(const T* cols, const ConvDims& d, T* dst) {
    const std::size_t positions = d.out_h * d.out_w;
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t ki = 0; ki < d.kernel; ++ki) {
            for (std::size_t kj = 0; kj < d.kernel; ++kj) {
                const T* row = cols + ((c * d.kernel + ki) * d.kernel + kj) * positions;
                for (std::size_t oy = 0; oy < d.out_h; ++oy) {
                    const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * d.geometry.stride + ki) -
                                             static_cast<std::ptrdiff_t>(d.geometry.pad);
                    if (y < 0 || y >= static_cast<std::ptrdiff_t>(d.height)) {
                        continue;
                    }
                    for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                        const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * d.geometry.stride + kj) -
                                                 static_cast<std::ptrdiff_t>(d.geometry.pad);
                        if (x < 0 || x >= static_cast<std::ptrdiff_t>(d.width)) {
                            continue;
                        }
                        dst[(c * d.height + static_cast<std::size_t>(y)) * d.width + static_cast<std::size_t>(x)] +=
                            row[oy * d.out_w + ox];
                    }
                }
            }
        }
    }
}

template <typename T>
void check_conv_args(const char* op, const BasicTensor<T>& x, const BasicTensor<T>& weight,
                     const BasicTensor<T>& bias, std::size_t in_channels_axis, std::size_t out_channels_axis) {
    require(x.rank() == 4, std::string(op) + ": input must be [B x C x H x W], got " + shape_to_string(x.shape()));
    require(weight.rank() == 4 && weight.dim(2) == weight.dim(3),
            std::string(op) + ": weight must be 4-d with a square kernel, got " + shape_to_string(weight.shape()));
    require(weight.dim(in_channels_axis) == x.dim(1), std::string(op) + ": input channels " +
                                                          shape_to_string(x.shape()) + " vs weight " +
                                                          shape_to_string(weight.shape()));
    require(!bias.defined() || (bias.rank() == 1 && bias.dim(0) == weight.dim(out_channels_axis)),
            std::string(op) + ": bias shape " + (bias.defined() ? shape_to_string(bias.shape()) : "") +
                " does not match weight " + shape_to_string(weight.shape()));
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      Conv2dGeometry geometry) {
    check_conv_args("conv2d", x, weight, bias, 1, 0);
    const std::size_t batch = x.dim(0);
    const std::size_t cout = weight.dim(0);
    const std::size_t k = weight.dim(2);
    const ConvDims d{x.dim(1),
                     x.dim(2),
                     x.dim(3),
                     k,
                     conv2d_output_size(x.dim(2), k, geometry),
                     conv2d_output_size(x.dim(3), k, geometry),
                     geometry};
    const std::size_t rows = d.channels * k * k;
    const std::size_t positions = d.out_h * d.out_w;
    const std::size_t in_size = d.channels * d.height * d.width;
    std::vector<T> cols(rows * positions);
    std::vector<T> out(batch * cout * positions);
    for (std::size_t b = 0; b < batch; ++b) {
        im2col(x.data().data() + b * in_size, d, cols.data());
        T* dst = out.data() + b * cout * positions;
        gemm(weight.data().data(), cols.data(), dst, cout, rows, positions, false);
        if (bias.defined()) {
            for (std::size_t c = 0; c < cout; ++c) {
                for (std::size_t p = 0; p < positions; ++p) {
                    dst[c * positions + p] += bias[c];
                }
            }
        }
    }
    const bool record = should_record<T>({&x, &weight, &bias});
    std::vector<detail::NodePtr<T>> inputs{x.node(), weight.node()};
    if (bias.defined()) {
        inputs.push_back(bias.node());
    }
    return emit<T>(
        "conv2d", Shape{batch, cout, d.out_h, d.out_w}, std::move(out), inputs, record,
        [xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr, d, batch, cout, rows,
         positions, in_size](const detail::TensorNode<T>& o) {
            std::vector<T> cols(rows * positions);
            std::vector<T> dcols(rows * positions);
            const auto wt = transposed(wn->data.data(), cout, rows);
            for (std::size_t b = 0; b < batch; ++b) {
                const T* dout = o.grad.data() + b * cout * positions;
                if (wn->requires_grad) {
                    im2col(xn->data.data() + b * in_size, d, cols.data());
                    const auto cols_t = transposed(cols.data(), rows, positions);
                    gemm(dout, cols_t.data(), grad_buffer(*wn).data(), cout, positions, rows, true);
                }
                if (xn->requires_grad) {
                    gemm(wt.data(), dout, dcols.data(), rows, cout, positions, false);
                    col2im(dcols.data(), d, grad_buffer(*xn).data() + b * in_size);
                }
                if (bn && bn->requires_grad) {
                    auto& gb = grad_buffer(*bn);
                    for (std::size_t c = 0; c < cout; ++c) {
                        for (std::size_t p = 0; p < positions; ++p) {
                            gb[c] += dout[c * positions + p];
                        }
                    }
                }
            }
        });
}

template <typename T>
BasicTensor<T> conv2d_transposed(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                                 Conv2dGeometry geometry) {
    check_conv_args("conv2d_transposed", x, weight, bias, 0, 1);
    const std::size_t batch = x.dim(0);
    const std::size_t cin = x.dim(1);
    const std::size_t cout = weight.dim(1);
    const std::size_t k = weight.dim(2);
    const std::size_t in_h = x.dim(2);
    const std::size_t in_w = x.dim(3);
    const std::size_t out_h = conv2d_transposed_output_size(in_h, k, geometry);
    const std::size_t out_w = conv2d_transposed_output_size(in_w, k, geometry);
    // The transposed conv is the adjoint of a conv from [Cout x out_h x out_w]
    // onto the input grid, so the im2col geometry is described from that side.
    const ConvDims d{cout, out_h, out_w, k, in_h, in_w, geometry};
    const std::size_t rows = cout * k * k;
    const std::size_t positions = in_h * in_w;
    const std::size_t out_size = cout * out_h * out_w;
    std::vector<T> cols(rows * positions);
    std::vector<T> out(batch * out_size, T(0));
    const auto wt = transposed(weight.data().data(), cin, rows);
    for (std::size_t b = 0; b < batch; ++b) {
        gemm(wt.data(), x.data().data() + b * cin * positions, cols.data(), rows, cin, positions, false);
        T* dst = out.data() + b * out_size;
        col2im(cols.data(), d, dst);
        if (bias.defined()) {
            const std::size_t plane = out_h * out_w;
            for (std::size_t c = 0; c < cout; ++c) {
                for (std::size_t p = 0; p < plane; ++p) {
                    dst[c * plane + p] += bias[c];
                }
            }
        }
    }
    const bool record = should_record<T>({&x, &weight, &bias});
    std::vector<detail::NodePtr<T>> inputs{x.node(), weight.node()};
    if (bias.defined()) {
        inputs.push_back(bias.node());
    }
    return emit<T>(
        "conv2d_transposed", Shape{batch, cout, out_h, out_w}, std::move(out), inputs, record,
        [xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr, d, batch, cin, cout, rows,
         positions, out_size](const detail::TensorNode<T>& o) {
            std::vector<T> dcols(rows * positions);
            for (std::size_t b = 0; b < batch; ++b) {
                const T* dout = o.grad.data() + b * out_size;
                im2col(dout, d, dcols.data());
                const T* xb = xn->data.data() + b * cin * positions;
                if (xn->requires_grad) {
                    // dX = W [Cin x rows] * dcols [rows x positions]
                    gemm(wn->data.data(), dcols.data(), grad_buffer(*xn).data() + b * cin * positions, cin, rows,
                         positions, true);
                }
                if (wn->requires_grad) {
                    // dW = X [Cin x positions] * dcols^T [positions x rows]
                    const auto dcols_t = transposed(dcols.data(), rows, positions);
                    gemm(xb, dcols_t.data(), grad_buffer(*wn).data(), cin, positions, rows, true);
                }
                if (bn && bn->requires_grad) {
                    auto& gb = grad_buffer(*bn);
                    const std::size_t plane = out_size / cout;
                    for (std::size_t c = 0; c < cout; ++c) {
                        for (std::size_t p = 0; p < plane; ++p) {
                            gb[c] += dout[c * plane + p];
                        }
                    }
                }
            }
        });
}

namespace {

struct Bin {
    std::size_t begin, end;
};

std::vector<Bin> adaptive_bins(std::size_t in, std::size_t out) {
    std::vector<Bin> bins(out);
    for (std::size_t i = 0; i < out; ++i) {
        bins[i].begin = (i * in) / out;
        bins[i].end = ((i + 1) * in + out - 1) / out;
    }
    return bins;
}

}  // namespace

template <typename T>
BasicTensor<T> adaptive_avg_pool2d(const BasicTensor<T>& x, std::size_t out_h, std::size_t out_w) {
    require(x.rank() == 4, "adaptive_avg_pool2d: input must be [B x C x H x W], got " + shape_to_string(x.shape()));
    require(out_h > 0 && out_w > 0 && out_h <= x.dim(2) && out_w <= x.dim(3),
            "adaptive_avg_pool2d: output size must lie in [1, input size]");
    const std::size_t planes = x.dim(0) * x.dim(1);
    const std::size_t h = x.dim(2);
    const std::size_t w = x.dim(3);
    const auto rows = adaptive_bins(h, out_h);
    const auto cols = adaptive_bins(w, out_w);
    const auto src = x.data();
    std::vector<T> out(planes * out_h * out_w);
    for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t i = 0; i < out_h; ++i) {
            for (std::size_t j = 0; j < out_w; ++j) {
                double acc = 0.0;
                for (std::size_t y = rows[i].begin; y < rows[i].end; ++y) {
                    for (std::size_t xx = cols[j].begin; xx < cols[j].end; ++xx) {
                        acc += static_cast<double>(src[(p * h + y) * w + xx]);
                    }
                }
                const double count =
                    static_cast<double>((rows[i].end - rows[i].begin) * (cols[j].end - cols[j].begin));
                out[(p * out_h + i) * out_w + j] = static_cast<T>(acc / count);
            }
        }
    }
    return emit<T>("adaptive_avg_pool2d", Shape{x.dim(0), x.dim(1), out_h, out_w}, std::move(out), {x.node()},
                   should_record<T>({&x}),
                   [xn = x.node(), rows, cols, planes, h, w, out_h, out_w](const detail::TensorNode<T>& o) {
                       auto& gx = grad_buffer(*xn);
                       for (std::size_t p = 0; p < planes; ++p) {
                           for (std::size_t i = 0; i < out_h; ++i) {
                               for (std::size_t j = 0; j < out_w; ++j) {
                                   const T count =
                                       static_cast<T>((rows[i].end - rows[i].begin) * (cols[j].end - cols[j].begin));
                                   const T g = o.grad[(p * out_h + i) * out_w + j] / count;
                                   for (std::size_t y = rows[i].begin; y < rows[i].end; ++y) {
                                       for (std::size_t xx = cols[j].begin; xx < cols[j].end; ++xx) {
                                           gx[(p * h + y) * w + xx] += g;
                                       }
                                   }
                               }
                           }
                       }
                   });
}

#define GSVIT_INSTANTIATE(T)                                                                              \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                         \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,   \
                                   Conv2dGeometry);                                                       \
    template BasicTensor<T> conv2d_transposed(const BasicTensor<T>&, const BasicTensor<T>&,               \
                                              const BasicTensor<T>&, Conv2dGeometry);                     \
    template BasicTensor<T> adaptive_avg_pool2d(const BasicTensor<T>&, std::size_t, std::size_t);

GSVIT_INSTANTIATE(float)
GSVIT_INSTANTIATE(double)

#undef GSVIT_INSTANTIATE

}  // namespace gsvit::ops
