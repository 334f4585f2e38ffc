#include "sbench/filters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbench {

namespace {

inline int clamp_idx(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

void require_odd(int k, const char* what) {
    if (k < 1 || k % 2 == 0)
        throw std::invalid_argument(std::string(what) + ": window must be odd and positive, got " +
                                    std::to_string(k));
}

std::vector<double> gaussian_taps(double sigma, int k) {
    const int r = k / 2;
    std::vector<double> taps(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
        taps[static_cast<std::size_t>(i + r)] = w;
        sum += w;
    }
    for (double& w : taps) w /= sum;
    return taps;
}

} // namespace

GrayImage median_filter(const GrayImage& img, int k) {
    require_odd(k, "median_filter");
    const int r = k / 2;
    GrayImage out(img.height, img.width);
    std::vector<float> window(static_cast<std::size_t>(k) * k);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            std::size_t m = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    window[m++] = img.at(clamp_idx(y + dy, img.height), clamp_idx(x + dx, img.width));
            auto mid = window.begin() + (window.size() / 2);
            std::nth_element(window.begin(), mid, window.end());
            out.at(y, x) = *mid;
        }
    }
    return out;
}

GrayImage average_filter(const GrayImage& img, int k) {
    require_odd(k, "average_filter");
    const int r = k / 2;
    const double inv = 1.0 / (k * k);
    GrayImage out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    acc += img.at(clamp_idx(y + dy, img.height), clamp_idx(x + dx, img.width));
            out.at(y, x) = static_cast<float>(acc * inv);
        }
    }
    return out;
}

GrayImage gaussian_filter(const GrayImage& img, double sigma, int k) {
    require_odd(k, "gaussian_filter");
    if (sigma <= 0.0)
        throw std::invalid_argument("gaussian_filter: sigma must be > 0, got " +
                                    std::to_string(sigma));
    const int r = k / 2;
    const std::vector<double> taps = gaussian_taps(sigma, k);

    // Separable: horizontal pass, then vertical.
    GrayImage tmp(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int d = -r; d <= r; ++d)
                acc += taps[static_cast<std::size_t>(d + r)] * img.at(y, clamp_idx(x + d, img.width));
            tmp.at(y, x) = static_cast<float>(acc);
        }
    }
    GrayImage out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int d = -r; d <= r; ++d)
                acc += taps[static_cast<std::size_t>(d + r)] * tmp.at(clamp_idx(y + d, img.height), x);
            out.at(y, x) = static_cast<float>(acc);
        }
    }
    return out;
}

GrayImage bilateral_filter(const GrayImage& img, double sigma_spatial, double sigma_range, int k) {
    require_odd(k, "bilateral_filter");
    if (sigma_spatial <= 0.0 || sigma_range <= 0.0)
        throw std::invalid_argument("bilateral_filter: sigmas must be > 0, got spatial=" +
                                    std::to_string(sigma_spatial) + " range=" +
                                    std::to_string(sigma_range));
    const int r = k / 2;
    const double inv_2ss = 1.0 / (2.0 * sigma_spatial * sigma_spatial);
    const double inv_2sr = 1.0 / (2.0 * sigma_range * sigma_range);

    std::vector<double> spatial(static_cast<std::size_t>(k) * k);
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            spatial[static_cast<std::size_t>((dy + r) * k + (dx + r))] =
                std::exp(-(dy * dy + dx * dx) * inv_2ss);

    GrayImage out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double center = img.at(y, x);
            double acc = 0.0, wsum = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const double q =
                        img.at(clamp_idx(y + dy, img.height), clamp_idx(x + dx, img.width));
                    const double dI = q - center;
                    const double w = spatial[static_cast<std::size_t>((dy + r) * k + (dx + r))] *
                                     std::exp(-dI * dI * inv_2sr);
                    acc += w * q;
                    wsum += w;
                }
            }
            out.at(y, x) = static_cast<float>(acc / wsum);
        }
    }
    return out;
}

GrayImage wiener_filter(const GrayImage& img, int window) {
    require_odd(window, "wiener_filter");
    const int r = window / 2;
    const double inv = 1.0 / (window * window);
    const double eps = 1e-12;

    GrayImage mean(img.height, img.width);
    GrayImage var(img.height, img.width);
    double noise_acc = 0.0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double s = 0.0, s2 = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const double v =
                        img.at(clamp_idx(y + dy, img.height), clamp_idx(x + dx, img.width));
                    s += v;
                    s2 += v * v;
                }
            }
            const double mu = s * inv;
            const double sigma2 = std::max(s2 * inv - mu * mu, 0.0);
            mean.at(y, x) = static_cast<float>(mu);
            var.at(y, x) = static_cast<float>(sigma2);
            noise_acc += sigma2;
        }
    }
    const double nu2 = noise_acc / img.size();

    GrayImage out(img.height, img.width);
    for (int i = 0; i < img.size(); ++i) {
        const double mu = mean.pixels[static_cast<std::size_t>(i)];
        const double sigma2 = var.pixels[static_cast<std::size_t>(i)];
        const double gain = std::max(sigma2 - nu2, 0.0) / std::max(sigma2, eps);
        const double v = mu + gain * (img.pixels[static_cast<std::size_t>(i)] - mu);
        out.pixels[static_cast<std::size_t>(i)] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

GrayImage anisotropic_diffusion(const GrayImage& img, int iterations, double kappa,
                                double lambda) {
    if (iterations < 0)
        throw std::invalid_argument("anisotropic_diffusion: iterations must be >= 0");
    if (kappa <= 0.0)
        throw std::invalid_argument("anisotropic_diffusion: kappa must be > 0, got " +
                                    std::to_string(kappa));
    if (!(lambda > 0.0 && lambda <= 0.25))
        throw std::invalid_argument("anisotropic_diffusion: lambda must be in (0, 0.25], got " +
                                    std::to_string(lambda));

    GrayImage cur = img;
    GrayImage next(img.height, img.width);
    const double inv_k2 = 1.0 / (kappa * kappa);
    for (int it = 0; it < iterations; ++it) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const double c0 = cur.at(y, x);
                const double d[4] = {
                    cur.at(clamp_idx(y - 1, img.height), x) - c0, // north
                    cur.at(clamp_idx(y + 1, img.height), x) - c0, // south
                    cur.at(y, clamp_idx(x + 1, img.width)) - c0,  // east
                    cur.at(y, clamp_idx(x - 1, img.width)) - c0,  // west
                };
                double flow = 0.0;
                for (double g : d) flow += std::exp(-g * g * inv_k2) * g;
                next.at(y, x) = static_cast<float>(c0 + lambda * flow);
            }
        }
        std::swap(cur, next);
    }
    return cur;
}

} // namespace sbench
