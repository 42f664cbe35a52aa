#include "gsvit/layers.hpp"

#include <cmath>

#include "gsvit/error.hpp"

namespace gsvit {

template <typename T>
BasicTensor<T> truncated_normal(Shape shape, Rng& rng, double stddev) {
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) {
        v = static_cast<T>(rng.truncated_normal(stddev));
    }
    return BasicTensor<T>(std::move(shape), std::move(data));
}

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : weight(truncated_normal<T>({in, out}, rng)) {
    if (with_bias) {
        bias = BasicTensor<T>::zeros({out});
    }
}

template <typename T>
BasicTensor<T> Linear<T>::forward(const BasicTensor<T>& x) const {
    if (x.rank() == 0 || x.rank() > 2 || x.shape().back() != in_features()) {
        throw ShapeError("linear: input " + shape_to_string(x.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
    }
    if (x.rank() == 1) {
        return ops::reshape(forward(ops::reshape(x, {1, in_features()})), {out_features()});
    }
    BasicTensor<T> y = ops::matmul(x, weight);
    return bias.defined() ? ops::add(y, bias) : y;
}

template <typename T>
void Linear<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight);
    if (bias.defined()) {
        params.add(prefix + ".bias", bias);
    }
}

template <typename T>
LayerNorm<T>::LayerNorm(std::size_t width, double eps_)
    : gamma(BasicTensor<T>::ones({width})), beta(BasicTensor<T>::zeros({width})), eps(eps_) {}

template <typename T>
BasicTensor<T> LayerNorm<T>::forward(const BasicTensor<T>& x) const {
    return ops::layer_norm(x, gamma, beta, eps);
}

template <typename T>
void LayerNorm<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    params.add(prefix + ".gamma", gamma);
    params.add(prefix + ".beta", beta);
}

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels)
    : gamma(BasicTensor<T>::ones({channels})),
      beta(BasicTensor<T>::zeros({channels})),
      running_mean(BasicTensor<T>::zeros({channels})),
      running_var(BasicTensor<T>::ones({channels})) {}

template <typename T>
BasicTensor<T> BatchNorm<T>::forward(const BasicTensor<T>& x, bool train) const {
    // Handles share storage, so train-mode updates land in the layer's buffers.
    BasicTensor<T> rm = running_mean;
    BasicTensor<T> rv = running_var;
    return ops::batch_norm(x, gamma, beta, rm, rv, {train, momentum, eps});
}

template <typename T>
void BatchNorm<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    params.add(prefix + ".gamma", gamma);
    params.add(prefix + ".beta", beta);
    params.add_buffer(prefix + ".running_mean", running_mean);
    params.add_buffer(prefix + ".running_var", running_var);
}

template <typename T>
BasicTensor<T> activate(const BasicTensor<T>& x, Activation activation) {
    switch (activation) {
        case Activation::kGelu:
            return ops::gelu(x);
        case Activation::kRelu:
            return ops::relu(x);
        case Activation::kElu:
            return ops::elu(x);
    }
    throw ConfigError("unknown activation");
}

template <typename T>
Mlp<T>::Mlp(std::size_t width, std::size_t hidden, Rng& rng, Activation activation_)
    : fc1(width, hidden, rng), fc2(hidden, width, rng), activation(activation_) {}

template <typename T>
BasicTensor<T> Mlp<T>::forward(const BasicTensor<T>& x) const {
    return fc2.forward(activate(fc1.forward(x), activation));
}

template <typename T>
void Mlp<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    fc1.collect(params, prefix + ".fc1");
    fc2.collect(params, prefix + ".fc2");
}

template <typename T>
BasicTensor<T> attention(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v, T scale) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(0) != k.dim(0) || k.dim(0) != v.dim(0) ||
        q.dim(1) != k.dim(1)) {
        throw ShapeError("attention: incompatible Q " + shape_to_string(q.shape()) + ", K " +
                         shape_to_string(k.shape()) + ", V " + shape_to_string(v.shape()));
    }
    BasicTensor<T> scores = ops::scale(ops::matmul(q, ops::transpose(k)), scale);
    return ops::matmul(ops::softmax(scores, 1), v);
}

template <typename T>
AttentionHead<T>::AttentionHead(std::size_t in, std::size_t head_dim, Rng& rng)
    : query(in, head_dim, rng, false), key(in, head_dim, rng, false), value(in, head_dim, rng, true) {}

template <typename T>
T AttentionHead<T>::scale() const {
    return static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim())));
}

template <typename T>
BasicTensor<T> AttentionHead<T>::forward(const BasicTensor<T>& x) const {
    return attention(query.forward(x), key.forward(x), value.forward(x), scale());
}

template <typename T>
void AttentionHead<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    query.collect(params, prefix + ".q");
    key.collect(params, prefix + ".k");
    value.collect(params, prefix + ".v");
}

template <typename T>
SEBlock<T>::SEBlock(std::size_t channels, std::size_t ratio_, Rng& rng) : ratio(ratio_) {
    if (ratio == 0 || channels % ratio != 0) {
        throw ConfigError("SE block: channels " + std::to_string(channels) + " not divisible by reduction ratio " +
                          std::to_string(ratio));
    }
    reduce = Linear<T>(channels, channels / ratio, rng);
    expand = Linear<T>(channels / ratio, channels, rng);
}

template <typename T>
BasicTensor<T> SEBlock<T>::gate(const BasicTensor<T>& x) const {
    const BasicTensor<T> x4 = x.rank() == 3 ? ops::reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)}) : x;
    if (x4.rank() != 4 || x4.dim(1) != reduce.in_features()) {
        throw ShapeError("SE block: input " + shape_to_string(x.shape()) + " does not have " +
                         std::to_string(reduce.in_features()) + " channels");
    }
    const std::size_t batch = x4.dim(0);
    const std::size_t channels = x4.dim(1);
    BasicTensor<T> pooled = ops::reshape(ops::adaptive_avg_pool2d(x4, 1, 1), {batch, channels});
    return ops::sigmoid(expand.forward(ops::relu(reduce.forward(pooled))));
}

template <typename T>
BasicTensor<T> SEBlock<T>::forward(const BasicTensor<T>& x) const {
    BasicTensor<T> g = gate(x);
    if (x.rank() == 3) {
        return ops::mul(x, ops::reshape(g, {x.dim(0), 1, 1}));
    }
    return ops::mul(x, ops::reshape(g, {x.dim(0), x.dim(1), 1, 1}));
}

template <typename T>
void SEBlock<T>::collect(ParameterSet<T>& params, const std::string& prefix) const {
    reduce.collect(params, prefix + ".reduce");
    expand.collect(params, prefix + ".expand");
}

#define GSVIT_INSTANTIATE(T)                                                                           \
    template BasicTensor<T> truncated_normal<T>(Shape, Rng&, double);                                  \
    template BasicTensor<T> activate<T>(const BasicTensor<T>&, Activation);                            \
    template BasicTensor<T> attention<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, T); \
    template struct Linear<T>;                                                                         \
    template struct LayerNorm<T>;                                                                      \
    template struct BatchNorm<T>;                                                                      \
    template struct Mlp<T>;                                                                            \
    template struct AttentionHead<T>;                                                                  \
    template struct SEBlock<T>;

GSVIT_INSTANTIATE(float)
GSVIT_INSTANTIATE(double)

#undef GSVIT_INSTANTIATE

}  // namespace gsvit
