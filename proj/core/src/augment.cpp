#include "gsvit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gsvit/error.hpp"

namespace gsvit {

AugmentParams sample_augment_params(const AugmentConfig& config, Rng& rng) {
    AugmentParams p;
    if (!config.enabled) {
        return p;
    }
    p.brightness = rng.uniform(-config.brightness, config.brightness);
    p.contrast = rng.uniform(config.contrast[0], config.contrast[1]);
    p.saturation = rng.uniform(config.saturation[0], config.saturation[1]);
    p.blur = rng.bernoulli(config.blur_prob);
    p.blur_sigma = p.blur ? rng.uniform(0.0, config.blur_sigma_max) : 0.0;
    return p;
}

namespace {

double gray(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void blur_pass(std::vector<double>& plane, std::size_t h, std::size_t w, const std::vector<double>& kernel,
               bool horizontal) {
    const auto radius = static_cast<long>(kernel.size() / 2);
    std::vector<double> out(plane.size());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (long k = -radius; k <= radius; ++k) {
                long yy = static_cast<long>(y), xx = static_cast<long>(x);
                (horizontal ? xx : yy) += k;
                xx = std::clamp(xx, 0L, static_cast<long>(w) - 1);
                yy = std::clamp(yy, 0L, static_cast<long>(h) - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] * plane[static_cast<std::size_t>(yy) * w +
                                                                            static_cast<std::size_t>(xx)];
            }
            out[y * w + x] = acc;
        }
    }
    plane.swap(out);
}

}  // namespace

Tensor apply_augment(const Tensor& image, const AugmentParams& params, std::size_t blur_kernel) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("augment: image " + shape_to_string(image.shape()) + " is not [3 x H x W]");
    }
    if (params.is_identity()) {
        return image.clone();
    }
    const std::size_t h = image.dim(1), w = image.dim(2), plane = h * w;
    std::vector<double> v(image.data().begin(), image.data().end());
    if (params.brightness != 0.0) {
        for (auto& x : v) {
            x += params.brightness;
        }
    }
    if (params.contrast != 1.0) {
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            mean += gray(v[i], v[plane + i], v[2 * plane + i]);
        }
        mean /= static_cast<double>(plane);
        for (auto& x : v) {
            x = mean + params.contrast * (x - mean);
        }
    }
    if (params.saturation != 1.0) {
        for (std::size_t i = 0; i < plane; ++i) {
            const double g = gray(v[i], v[plane + i], v[2 * plane + i]);
            for (std::size_t c = 0; c < 3; ++c) {
                v[c * plane + i] = g + params.saturation * (v[c * plane + i] - g);
            }
        }
    }
    for (auto& x : v) {
        x = std::clamp(x, 0.0, 1.0);
    }
    if (params.blur && params.blur_sigma > 0.0 && blur_kernel > 1) {
        std::vector<double> kernel(blur_kernel);
        const double radius = static_cast<double>(blur_kernel / 2);
        double total = 0.0;
        for (std::size_t k = 0; k < blur_kernel; ++k) {
            const double d = static_cast<double>(k) - radius;
            kernel[k] = std::exp(-d * d / (2.0 * params.blur_sigma * params.blur_sigma));
            total += kernel[k];
        }
        for (auto& k : kernel) {
            k /= total;
        }
        for (std::size_t c = 0; c < 3; ++c) {
            std::vector<double> p(v.begin() + static_cast<long>(c * plane), v.begin() + static_cast<long>((c + 1) * plane));
            blur_pass(p, h, w, kernel, true);
            blur_pass(p, h, w, kernel, false);
            std::copy(p.begin(), p.end(), v.begin() + static_cast<long>(c * plane));
        }
    }
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(std::clamp(v[i], 0.0, 1.0));
    }
    return Tensor(image.shape(), std::move(out));
}

}  // namespace gsvit
