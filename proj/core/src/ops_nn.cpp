// Activations, normalisation layers, dropout and losses.

#include <cmath>
#include <numbers>

#include "gsvit/ops.hpp"
#include "op_support.hpp"

namespace gsvit::ops {

using detail::emit;
using detail::grad_buffer;
using detail::require;
using detail::should_record;

namespace {

// `deriv(x, y)` gives dy/dx from the input and output values.
template <typename T, typename Fn, typename Deriv>
BasicTensor<T> unary(std::string_view name, const BasicTensor<T>& x, Fn fn, Deriv deriv) {
    const auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        out[i] = fn(src[i]);
    }
    return emit<T>(name, x.shape(), std::move(out), {x.node()}, should_record<T>({&x}),
                   [xn = x.node(), deriv](const detail::TensorNode<T>& o) {
                       auto& gx = grad_buffer(*xn);
                       for (std::size_t i = 0; i < gx.size(); ++i) {
                           gx[i] += o.grad[i] * deriv(xn->data[i], o.data[i]);
                       }
                   });
}

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
BasicTensor<T> relu(const BasicTensor<T>& x) {
    return unary<T>(
        "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
    return unary<T>(
        "gelu", x,
        [](T v) { return static_cast<T>(0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2))); },
        [](T v, T) {
            const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
            return static_cast<T>(cdf + v * pdf);
        });
}

template <typename T>
BasicTensor<T> elu(const BasicTensor<T>& x, T alpha) {
    return unary<T>(
        "elu", x, [alpha](T v) { return v > T(0) ? v : static_cast<T>(alpha * std::expm1(v)); },
        [alpha](T v, T) { return v > T(0) ? T(1) : static_cast<T>(alpha * std::exp(v)); });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
    return unary<T>(
        "sigmoid", x,
        [](T v) {
            if (v >= T(0)) {
                return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
            }
            const double e = std::exp(static_cast<double>(v));
            return static_cast<T>(e / (1.0 + e));
        },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis) {
    require(axis < x.rank(), "softmax: axis " + std::to_string(axis) + " out of range for " +
                                 shape_to_string(x.shape()));
    const auto src = x.data();
    for (T v : src) {
        if (std::isnan(v)) {
            throw NumericError("softmax: NaN in input " + shape_to_string(x.shape()));
        }
    }
    const AxisExtents e = axis_extents(x.shape(), axis);
    std::vector<T> out(src.size());
    for (std::size_t o = 0; o < e.outer; ++o) {
        for (std::size_t i = 0; i < e.inner; ++i) {
            const std::size_t base = o * e.length * e.inner + i;
            T peak = src[base];
            for (std::size_t k = 1; k < e.length; ++k) {
                peak = std::max(peak, src[base + k * e.inner]);
            }
            double total = 0.0;
            for (std::size_t k = 0; k < e.length; ++k) {
                const double v = std::exp(static_cast<double>(src[base + k * e.inner] - peak));
                out[base + k * e.inner] = static_cast<T>(v);
                total += v;
            }
            for (std::size_t k = 0; k < e.length; ++k) {
                out[base + k * e.inner] = static_cast<T>(out[base + k * e.inner] / total);
            }
        }
    }
    return emit<T>("softmax", x.shape(), std::move(out), {x.node()}, should_record<T>({&x}),
                   [xn = x.node(), e](const detail::TensorNode<T>& o) {
                       auto& gx = grad_buffer(*xn);
                       for (std::size_t r = 0; r < e.outer; ++r) {
                           for (std::size_t i = 0; i < e.inner; ++i) {
                               const std::size_t base = r * e.length * e.inner + i;
                               double dot = 0.0;
                               for (std::size_t k = 0; k < e.length; ++k) {
                                   const std::size_t at = base + k * e.inner;
                                   dot += static_cast<double>(o.grad[at]) * static_cast<double>(o.data[at]);
                               }
                               for (std::size_t k = 0; k < e.length; ++k) {
                                   const std::size_t at = base + k * e.inner;
                                   gx[at] += static_cast<T>(o.data[at] * (o.grad[at] - dot));
                               }
                           }
                       }
                   });
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          double eps) {
    if (!(eps > 0.0)) {
        throw ConfigError("layer_norm: eps must be positive, got " + std::to_string(eps));
    }
    require(x.rank() >= 1, "layer_norm: input must have at least one dimension");
    const std::size_t width = x.shape().back();
    require(gamma.rank() == 1 && gamma.dim(0) == width && beta.rank() == 1 && beta.dim(0) == width,
            "layer_norm: gamma/beta " + shape_to_string(gamma.shape()) + "/" + shape_to_string(beta.shape()) +
                " must match last dimension of " + shape_to_string(x.shape()));
    const std::size_t rows = x.numel() / width;
    const auto src = x.data();
    std::vector<T> out(src.size());
    std::vector<T> normed(src.size());
    std::vector<T> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = src.data() + r * width;
        double mu = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            mu += static_cast<double>(row[j]);
        }
        mu /= static_cast<double>(width);
        double var = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            const double dv = static_cast<double>(row[j]) - mu;
            var += dv * dv;
        }
        var /= static_cast<double>(width);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = static_cast<T>(is);
        for (std::size_t j = 0; j < width; ++j) {
            const T xh = static_cast<T>((static_cast<double>(row[j]) - mu) * is);
            normed[r * width + j] = xh;
            out[r * width + j] = xh * gamma[j] + beta[j];
        }
    }
    return emit<T>(
        "layer_norm", x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
        should_record<T>({&x, &gamma, &beta}),
        [xn = x.node(), gn = gamma.node(), bn = beta.node(), normed = std::move(normed), inv_std = std::move(inv_std),
         rows, width](const detail::TensorNode<T>& o) {
            if (gn->requires_grad) {
                auto& gg = grad_buffer(*gn);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < width; ++j) {
                        gg[j] += o.grad[r * width + j] * normed[r * width + j];
                    }
                }
            }
            if (bn->requires_grad) {
                auto& gb = grad_buffer(*bn);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < width; ++j) {
                        gb[j] += o.grad[r * width + j];
                    }
                }
            }
            if (xn->requires_grad) {
                auto& gx = grad_buffer(*xn);
                for (std::size_t r = 0; r < rows; ++r) {
                    double mean_d = 0.0;
                    double mean_dx = 0.0;
                    for (std::size_t j = 0; j < width; ++j) {
                        const double d = static_cast<double>(o.grad[r * width + j]) * gn->data[j];
                        mean_d += d;
                        mean_dx += d * normed[r * width + j];
                    }
                    mean_d /= static_cast<double>(width);
                    mean_dx /= static_cast<double>(width);
                    for (std::size_t j = 0; j < width; ++j) {
                        const double d = static_cast<double>(o.grad[r * width + j]) * gn->data[j];
                        gx[r * width + j] +=
                            static_cast<T>(inv_std[r] * (d - mean_d - normed[r * width + j] * mean_dx));
                    }
                }
            }
        });
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          BasicTensor<T>& running_mean, BasicTensor<T>& running_var, BatchNormOptions options) {
    if (!(options.eps > 0.0)) {
        throw ConfigError("batch_norm: eps must be positive");
    }
    require(x.rank() >= 2, "batch_norm: input must be [B x C x ...], got " + shape_to_string(x.shape()));
    const std::size_t batch = x.dim(0);
    const std::size_t channels = x.dim(1);
    const std::size_t spatial = x.numel() / (batch * channels);
    for (const BasicTensor<T>* p : {&gamma, &beta, static_cast<const BasicTensor<T>*>(&running_mean),
                                    static_cast<const BasicTensor<T>*>(&running_var)}) {
        require(p->rank() == 1 && p->dim(0) == channels,
                "batch_norm: per-channel tensor " + shape_to_string(p->shape()) + " does not match " +
                    shape_to_string(x.shape()));
    }
    const std::size_t count = batch * spatial;
    if (options.train && count < 2) {
        throw ShapeError("batch_norm: train mode needs more than one value per channel, got " +
                         shape_to_string(x.shape()));
    }
    const auto src = x.data();
    std::vector<T> mean_c(channels);
    std::vector<T> inv_std(channels);
    if (options.train) {
        auto rm = running_mean.mutable_data();
        auto rv = running_var.mutable_data();
        for (std::size_t c = 0; c < channels; ++c) {
            double mu = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const T* plane = src.data() + (b * channels + c) * spatial;
                for (std::size_t s = 0; s < spatial; ++s) {
                    mu += static_cast<double>(plane[s]);
                }
            }
            mu /= static_cast<double>(count);
            double var = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const T* plane = src.data() + (b * channels + c) * spatial;
                for (std::size_t s = 0; s < spatial; ++s) {
                    const double dv = static_cast<double>(plane[s]) - mu;
                    var += dv * dv;
                }
            }
            const double biased = var / static_cast<double>(count);
            const double unbiased = var / static_cast<double>(count - 1);
            mean_c[c] = static_cast<T>(mu);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(biased + options.eps));
            rm[c] = static_cast<T>((1.0 - options.momentum) * rm[c] + options.momentum * mu);
            rv[c] = static_cast<T>((1.0 - options.momentum) * rv[c] + options.momentum * unbiased);
        }
    } else {
        for (std::size_t c = 0; c < channels; ++c) {
            mean_c[c] = running_mean[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + options.eps));
        }
    }
    std::vector<T> normed(src.size());
    std::vector<T> out(src.size());
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) {
                const T xh = (src[base + s] - mean_c[c]) * inv_std[c];
                normed[base + s] = xh;
                out[base + s] = xh * gamma[c] + beta[c];
            }
        }
    }
    return emit<T>(
        options.train ? "batch_norm_train" : "batch_norm_eval", x.shape(), std::move(out),
        {x.node(), gamma.node(), beta.node()}, should_record<T>({&x, &gamma, &beta}),
        [xn = x.node(), gn = gamma.node(), bn = beta.node(), normed = std::move(normed), inv_std, batch, channels,
         spatial, count, train = options.train](const detail::TensorNode<T>& o) {
            std::vector<double> sum_d(channels, 0.0);
            std::vector<double> sum_dx(channels, 0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t base = (b * channels + c) * spatial;
                    for (std::size_t s = 0; s < spatial; ++s) {
                        sum_d[c] += o.grad[base + s];
                        sum_dx[c] += static_cast<double>(o.grad[base + s]) * normed[base + s];
                    }
                }
            }
            if (gn->requires_grad) {
                auto& gg = grad_buffer(*gn);
                for (std::size_t c = 0; c < channels; ++c) {
                    gg[c] += static_cast<T>(sum_dx[c]);
                }
            }
            if (bn->requires_grad) {
                auto& gb = grad_buffer(*bn);
                for (std::size_t c = 0; c < channels; ++c) {
                    gb[c] += static_cast<T>(sum_d[c]);
                }
            }
            if (!xn->requires_grad) {
                return;
            }
            auto& gx = grad_buffer(*xn);
            const double n = static_cast<double>(count);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t base = (b * channels + c) * spatial;
                    const double g = gn->data[c];
                    for (std::size_t s = 0; s < spatial; ++s) {
                        double d = static_cast<double>(o.grad[base + s]);
                        if (train) {
                            d = d - sum_d[c] / n - normed[base + s] * sum_dx[c] / n;
                        }
                        gx[base + s] += static_cast<T>(g * inv_std[c] * d);
                    }
                }
            }
        });
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double p, bool train, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
    }
    if (!train || p == 0.0) {
        return x;
    }
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    std::vector<T> mask(x.numel());
    for (auto& m : mask) {
        m = rng.bernoulli(p) ? T(0) : keep_scale;
    }
    const auto src = x.data();
    std::vector<T> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        out[i] = src[i] * mask[i];
    }
    return emit<T>("dropout", x.shape(), std::move(out), {x.node()}, should_record<T>({&x}),
                   [xn = x.node(), mask = std::move(mask)](const detail::TensorNode<T>& o) {
                       auto& gx = grad_buffer(*xn);
                       for (std::size_t i = 0; i < gx.size(); ++i) {
                           gx[i] += o.grad[i] * mask[i];
                       }
                   });
}

template <typename T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, const std::vector<std::size_t>& labels) {
    require(logits.rank() == 2 && logits.dim(0) == labels.size(),
            "cross_entropy: logits " + shape_to_string(logits.shape()) + " vs " + std::to_string(labels.size()) +
                " labels");
    const std::size_t batch = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    const auto src = logits.data();
    std::vector<T> probs(src.size());
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        require(labels[b] < classes, "cross_entropy: label " + std::to_string(labels[b]) + " out of range [0, " +
                                         std::to_string(classes) + ")");
        const T* row = src.data() + b * classes;
        double peak = row[0];
        for (std::size_t k = 1; k < classes; ++k) {
            peak = std::max(peak, static_cast<double>(row[k]));
        }
        double z = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            z += std::exp(static_cast<double>(row[k]) - peak);
        }
        const double log_z = peak + std::log(z);
        total += log_z - static_cast<double>(row[labels[b]]);
        for (std::size_t k = 0; k < classes; ++k) {
            probs[b * classes + k] = static_cast<T>(std::exp(static_cast<double>(row[k]) - log_z));
        }
    }
    const double loss = total / static_cast<double>(batch);
    return emit<T>("cross_entropy", Shape{}, std::vector<T>{static_cast<T>(loss)}, {logits.node()},
                   should_record<T>({&logits}),
                   [ln = logits.node(), probs = std::move(probs), labels, batch,
                    classes](const detail::TensorNode<T>& o) {
                       auto& gl = grad_buffer(*ln);
                       const T g = o.grad[0] / static_cast<T>(batch);
                       for (std::size_t b = 0; b < batch; ++b) {
                           for (std::size_t k = 0; k < classes; ++k) {
                               const T target = k == labels[b] ? T(1) : T(0);
                               gl[b * classes + k] += g * (probs[b * classes + k] - target);
                           }
                       }
                   });
}

template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target) {
    require(prediction.shape() == target.shape(), "mse_loss: shape mismatch " + shape_to_string(prediction.shape()) +
                                                      " vs " + shape_to_string(target.shape()));
    const auto p = prediction.data();
    const auto t = target.data();
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        total += d * d;
    }
    const double n = static_cast<double>(p.size());
    return emit<T>("mse_loss", Shape{}, std::vector<T>{static_cast<T>(total / n)},
                   {prediction.node(), target.node()}, should_record<T>({&prediction, &target}),
                   [pn = prediction.node(), tn = target.node(), n](const detail::TensorNode<T>& o) {
                       const double scale = 2.0 * static_cast<double>(o.grad[0]) / n;
                       if (pn->requires_grad) {
                           auto& gp = grad_buffer(*pn);
                           for (std::size_t i = 0; i < gp.size(); ++i) {
                               gp[i] += static_cast<T>(scale * (static_cast<double>(pn->data[i]) - tn->data[i]));
                           }
                       }
                       if (tn->requires_grad) {
                           auto& gt = grad_buffer(*tn);
                           for (std::size_t i = 0; i < gt.size(); ++i) {
                               gt[i] -= static_cast<T>(scale * (static_cast<double>(pn->data[i]) - tn->data[i]));
                           }
                       }
                   });
}

#define GSVIT_INSTANTIATE(T)                                                                               \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                   \
    template BasicTensor<T> gelu(const BasicTensor<T>&);                                                   \
    template BasicTensor<T> elu(const BasicTensor<T>&, T);                                                 \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                \
    template BasicTensor<T> softmax(const BasicTensor<T>&, std::size_t);                                   \
    template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                       double);                                                            \
    template BasicTensor<T> batch_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                       BasicTensor<T>&, BasicTensor<T>&, BatchNormOptions);                \
    template BasicTensor<T> dropout(const BasicTensor<T>&, double, bool, Rng&);                            \
    template BasicTensor<T> cross_entropy(const BasicTensor<T>&, const std::vector<std::size_t>&);         \
    template BasicTensor<T> mse_loss(const BasicTensor<T>&, const BasicTensor<T>&);

GSVIT_INSTANTIATE(float)
GSVIT_INSTANTIATE(double)

#undef GSVIT_INSTANTIATE

}  // namespace gsvit::ops
