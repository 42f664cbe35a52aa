#pragma once

#include <cstddef>
#include <vector>

#include "gsvit/params.hpp"

namespace gsvit {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over the tunable entries of a parameter set. Moments are kept in double.
class Adam {
public:
    Adam(const ParameterSet<float>& params, AdamOptions options);

    // Applies one update from the accumulated gradients, then zeroes them.
    // Entries without a gradient still advance their moments with g = 0.
    void step();
    void set_lr(double lr) { options_.lr = lr; }
    double lr() const { return options_.lr; }
    std::size_t step_count() const { return steps_; }

private:
    struct Slot {
        Tensor tensor;
        std::vector<double> m;
        std::vector<double> v;
    };
    AdamOptions options_;
    std::vector<Slot> slots_;
    std::size_t steps_ = 0;
};

// base * gamma^epoch.
double exponential_lr(double base, double gamma, std::size_t epoch);

}  // namespace gsvit
