#include "gsvit/optim.hpp"

#include <cmath>

namespace gsvit {

Adam::Adam(const ParameterSet<float>& params, AdamOptions options) : options_(options) {
    for (const auto& entry : params.entries()) {
        if (entry.tunable && !entry.buffer) {
            slots_.push_back({entry.tensor, std::vector<double>(entry.tensor.numel(), 0.0),
                              std::vector<double>(entry.tensor.numel(), 0.0)});
        }
    }
}

void Adam::step() {
    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (auto& slot : slots_) {
        auto data = slot.tensor.mutable_data();
        const bool has_grad = slot.tensor.has_grad();
        const float* grad = has_grad ? slot.tensor.grad().data() : nullptr;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = has_grad ? static_cast<double>(grad[i]) : 0.0;
            slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * g;
            slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * g * g;
            const double update = options_.lr * (slot.m[i] / c1) / (std::sqrt(slot.v[i] / c2) + options_.eps);
            data[i] = static_cast<float>(static_cast<double>(data[i]) - update);
        }
        slot.tensor.zero_grad();
    }
}

double exponential_lr(double base, double gamma, std::size_t epoch) {
    return base * std::pow(gamma, static_cast<double>(epoch));
}

}  // namespace gsvit
