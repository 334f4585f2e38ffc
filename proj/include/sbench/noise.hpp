#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sbench/image.hpp"

namespace sbench {

// Multiplicative Gaussian speckle: g = clip(f + f*eta, 0, 1) with
// eta ~ N(0, variance) i.i.d. per pixel.
struct NoiseSpec {
    double variance = 0.0;
    std::uint64_t seed = 0;
};

// The paper's canonical variance grid.
inline const std::vector<double>& canonical_variances() {
    static const std::vector<double> v = {0.08, 0.1, 0.3, 0.5, 0.7};
    return v;
}

GrayImage add_speckle(const GrayImage& img, const NoiseSpec& spec);

// One noisy copy per variance, each with a sub-seed mixed from (seed, index).
std::vector<std::pair<double, GrayImage>> noise_grid(const GrayImage& img,
                                                     const std::vector<double>& variances,
                                                     std::uint64_t seed);

} // namespace sbench
