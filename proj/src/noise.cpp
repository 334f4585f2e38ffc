#include "sbench/noise.hpp"
#include "sbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbench {

GrayImage add_speckle(const GrayImage& img, const NoiseSpec& spec) {
    if (spec.variance < 0.0)
        throw std::invalid_argument("add_speckle: negative variance " +
                                    std::to_string(spec.variance));
    if (spec.variance == 0.0) return img;

    GrayImage out = img;
    Rng rng(spec.seed);
    const double sigma = std::sqrt(spec.variance);
    for (float& p : out.pixels) {
        const double eta = sigma * rng.next_gaussian();
        p = static_cast<float>(std::clamp(p + p * eta, 0.0, 1.0));
    }
    return out;
}

std::vector<std::pair<double, GrayImage>> noise_grid(const GrayImage& img,
                                                     const std::vector<double>& variances,
                                                     std::uint64_t seed) {
    std::vector<std::pair<double, GrayImage>> out;
    out.reserve(variances.size());
    for (std::size_t i = 0; i < variances.size(); ++i) {
        NoiseSpec spec{variances[i], mix_seed(seed, static_cast<std::uint64_t>(i))};
        out.emplace_back(variances[i], add_speckle(img, spec));
    }
    return out;
}

} // namespace sbench
