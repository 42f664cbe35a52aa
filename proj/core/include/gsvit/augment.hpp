#pragma once

#include "gsvit/config.hpp"
#include "gsvit/rng.hpp"
#include "gsvit/tensor.hpp"

namespace gsvit {

struct AugmentParams {
    double brightness = 0.0;  // added to every pixel
    double contrast = 1.0;    // scales the distance from the image's mean gray
    double saturation = 1.0;  // scales the distance from each pixel's gray
    bool blur = false;
    double blur_sigma = 0.0;

    bool is_identity() const { return brightness == 0.0 && contrast == 1.0 && saturation == 1.0 && !blur; }
};

AugmentParams sample_augment_params(const AugmentConfig& config, Rng& rng);

// Photometric jitter then optional separable Gaussian blur (edge-clamped), on a
// [3 x H x W] image in [0,1]. The result is clamped to [0,1]. Identity steps are
// skipped, so identity parameters return an exact copy.
Tensor apply_augment(const Tensor& image, const AugmentParams& params, std::size_t blur_kernel);

inline Tensor augment(const Tensor& image, const AugmentConfig& config, Rng& rng) {
    return apply_augment(image, sample_augment_params(config, rng), config.blur_kernel);
}

}  // namespace gsvit
