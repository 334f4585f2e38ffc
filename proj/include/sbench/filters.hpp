#pragma once

#include "sbench/image.hpp"

namespace sbench {

// Parameters for the six classical baselines. Window sizes are odd so every
// filter is centered; borders replicate the edge pixel.
struct FilterConfig {
    int median_kernel = 3;
    int average_kernel = 3;
    double gaussian_sigma = 1.0;
    int gaussian_kernel = 5;
    double bilateral_sigma_spatial = 2.0;
    double bilateral_sigma_range = 0.1;
    int bilateral_kernel = 5;
    int wiener_window = 3;
    int pm_iterations = 10;
    double pm_kappa = 0.1;
    double pm_lambda = 0.25;
};

GrayImage median_filter(const GrayImage& img, int k);
GrayImage average_filter(const GrayImage& img, int k);
GrayImage gaussian_filter(const GrayImage& img, double sigma, int k);
GrayImage bilateral_filter(const GrayImage& img, double sigma_spatial, double sigma_range, int k);

// Local-adaptive (Lee-type) Wiener: f = mu + max(var - nu2, 0)/max(var, eps)
// * (g - mu), with nu2 the mean of all local variances. Output clipped to
// [0,1].
GrayImage wiener_filter(const GrayImage& img, int window);

// Perona-Malik diffusion: conduction exp(-(grad/kappa)^2), 4-neighbor
// gradients, explicit update I += lambda * sum(c * grad). Stable and
// range-preserving for lambda in (0, 0.25].
GrayImage anisotropic_diffusion(const GrayImage& img, int iterations, double kappa,
                                double lambda);

} // namespace sbench
