#include "sbench/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sbench {

namespace {

void require_same_dims(const GrayImage& a, const GrayImage& b, const char* what) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                    std::to_string(a.height) + "x" + std::to_string(a.width) +
                                    " vs " + std::to_string(b.height) + "x" +
                                    std::to_string(b.width));
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;
constexpr double kSsimL = 1.0;

const double* ssim_weights() {
    static const auto w = [] {
        static double buf[kSsimWindow * kSsimWindow];
        const int r = kSsimWindow / 2;
        double sum = 0.0;
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * kSsimSigma * kSsimSigma));
                buf[(dy + r) * kSsimWindow + (dx + r)] = v;
                sum += v;
            }
        for (double& v : buf) v /= sum;
        return buf;
    }();
    return w;
}

} // namespace

double mse_metric(const GrayImage& ref, const GrayImage& test) {
    require_same_dims(ref, test, "mse_metric");
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.pixels.size(); ++i) {
        const double d = static_cast<double>(ref.pixels[i]) - test.pixels[i];
        acc += d * d;
    }
    return acc / static_cast<double>(ref.pixels.size());
}

double psnr_from_mse(double mse, double peak) {
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const GrayImage& ref, const GrayImage& test, double peak) {
    return psnr_from_mse(mse_metric(ref, test), peak);
}

double ssim(const GrayImage& ref, const GrayImage& test) {
    require_same_dims(ref, test, "ssim");
    if (ref.height < kSsimWindow || ref.width < kSsimWindow)
        throw std::invalid_argument("ssim: image " + std::to_string(ref.height) + "x" +
                                    std::to_string(ref.width) + " smaller than the 11x11 window");

    const double c1 = (kSsimK1 * kSsimL) * (kSsimK1 * kSsimL);
    const double c2 = (kSsimK2 * kSsimL) * (kSsimK2 * kSsimL);
    const double* w = ssim_weights();
    const int r = kSsimWindow / 2;

    double total = 0.0;
    long count = 0;
    for (int y = r; y < ref.height - r; ++y) {
        for (int x = r; x < ref.width - r; ++x) {
            double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const double wv = w[(dy + r) * kSsimWindow + (dx + r)];
                    const double a = ref.at(y + dy, x + dx);
                    const double b = test.at(y + dy, x + dx);
                    mu_a += wv * a;
                    mu_b += wv * b;
                    aa += wv * a * a;
                    bb += wv * b * b;
                    ab += wv * a * b;
                }
            }
            const double var_a = aa - mu_a * mu_a;
            const double var_b = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;
            const double s = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                             ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += s;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

MetricsRow evaluate_method(const std::vector<GrayImage>& ref_set,
                           const std::vector<GrayImage>& test_set,
                           const std::string& method_name, double variance,
                           std::uint64_t seed) {
    if (ref_set.empty())
        throw std::invalid_argument("evaluate_method: empty image sets");
    if (ref_set.size() != test_set.size())
        throw std::invalid_argument("evaluate_method: " + std::to_string(ref_set.size()) +
                                    " refs vs " + std::to_string(test_set.size()) + " tests");

    MetricsRow row;
    row.method = method_name;
    row.variance = variance;
    row.n_images = static_cast<int>(ref_set.size());
    row.seed = seed;

    double psnr_acc = 0.0, ssim_acc = 0.0, mse_acc = 0.0;
    bool psnr_inf = false;
    for (std::size_t i = 0; i < ref_set.size(); ++i) {
        const double m = mse_metric(ref_set[i], test_set[i]);
        const double p = psnr_from_mse(m);
        if (std::isinf(p))
            psnr_inf = true;
        else
            psnr_acc += p;
        ssim_acc += ssim(ref_set[i], test_set[i]);
        mse_acc += m;
    }
    const double n = static_cast<double>(ref_set.size());
    row.psnr_db = psnr_inf ? std::numeric_limits<double>::infinity() : psnr_acc / n;
    row.ssim = ssim_acc / n;
    row.mse = mse_acc / n;
    return row;
}

} // namespace sbench
