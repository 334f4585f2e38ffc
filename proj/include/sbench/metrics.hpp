#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbench/image.hpp"

namespace sbench {

// One (method, variance) aggregate. psnr_db = 10*log10(1/mse) holds exactly
// per image; the aggregate averages PSNR in the dB domain and MSE linearly,
// so the row-level identity is only approximate.
struct MetricsRow {
    std::string method;
    double variance = 0.0;
    double psnr_db = 0.0; // +infinity when any pair is identical
    double ssim = 0.0;
    double mse = 0.0;
    int n_images = 0;
    std::uint64_t seed = 0;
};

double mse_metric(const GrayImage& ref, const GrayImage& test);

// 10*log10(peak^2 / mse); +infinity sentinel when mse == 0.
double psnr(const GrayImage& ref, const GrayImage& test, double peak = 1.0);
double psnr_from_mse(double mse, double peak = 1.0);

// Mean local SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03, L=1.
// Windows are fully interior (valid region), so inputs must be >= 11x11.
double ssim(const GrayImage& ref, const GrayImage& test);

MetricsRow evaluate_method(const std::vector<GrayImage>& ref_set,
                           const std::vector<GrayImage>& test_set,
                           const std::string& method_name, double variance,
                           std::uint64_t seed);

} // namespace sbench
