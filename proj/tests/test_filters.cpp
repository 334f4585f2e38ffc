#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sbench/filters.hpp"

using namespace sbench;

namespace {

void check_images_close(const GrayImage& got, const GrayImage& want, double tol) {
    REQUIRE(got.height == want.height);
    REQUIRE(got.width == want.width);
    for (std::size_t i = 0; i < got.pixels.size(); ++i)
        CHECK(std::abs(got.pixels[i] - want.pixels[i]) <= tol);
}

void check_constant(const GrayImage& img, float value, double tol = 0.0) {
    for (float p : img.pixels) CHECK(std::abs(p - value) <= tol);
}

} // namespace

TEST_CASE("median_filter: constants, impulse removal, brute-force match") {
    check_constant(median_filter(GrayImage(7, 7, 0.6f), 3), 0.6f);

    GrayImage impulse(7, 7, 0.0f);
    impulse.at(3, 3) = 1.0f;
    check_constant(median_filter(impulse, 3), 0.0f);

    const GrayImage img = oracle::random_image(5, 5, 201);
    check_images_close(median_filter(img, 3), oracle::median_ref(img, 3), 0.0);

    CHECK_THROWS_AS(median_filter(img, 4), std::invalid_argument);
}

TEST_CASE("average_filter: constants, impulse response, brute-force match") {
    check_constant(average_filter(GrayImage(7, 7, 0.6f), 3), 0.6f, 1e-7);

    GrayImage impulse(7, 7, 0.0f);
    impulse.at(3, 3) = 1.0f;
    const GrayImage out = average_filter(impulse, 3);
    CHECK(out.at(3, 3) == doctest::Approx(1.0 / 9.0).epsilon(1e-6));
    CHECK(out.at(0, 0) == 0.0f);

    const GrayImage img = oracle::random_image(5, 5, 202);
    check_images_close(average_filter(img, 3), oracle::average_ref(img, 3), 1e-6);
}

TEST_CASE("gaussian_filter: normalized kernel, constants, separable == dense") {
    // kernel weights sum to 1: an interior impulse response must sum to 1
    GrayImage impulse(15, 15, 0.0f);
    impulse.at(7, 7) = 1.0f;
    const GrayImage resp = gaussian_filter(impulse, 1.0, 5);
    double total = 0.0;
    for (float p : resp.pixels) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

    check_constant(gaussian_filter(GrayImage(9, 9, 0.42f), 1.0, 5), 0.42f, 1e-6);

    const GrayImage img = oracle::random_image(11, 9, 203);
    check_images_close(gaussian_filter(img, 1.0, 5), oracle::gaussian_dense_ref(img, 1.0, 5), 1e-5);

    CHECK_THROWS_AS(gaussian_filter(img, 0.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_filter(img, 1.0, 4), std::invalid_argument);
}

TEST_CASE("bilateral_filter: constants, Gaussian limit, edge preservation") {
    check_constant(bilateral_filter(GrayImage(8, 8, 0.3f), 2.0, 0.1, 5), 0.3f, 1e-6);

    // sigma_range -> infinity collapses to the spatial Gaussian
    const GrayImage img = oracle::random_image(12, 10, 204);
    check_images_close(bilateral_filter(img, 2.0, 1e6, 5), gaussian_filter(img, 2.0, 5), 1e-4);

    // a 0|1 step stays a step away from the boundary
    GrayImage step(10, 10, 0.0f);
    for (int y = 0; y < 10; ++y)
        for (int x = 5; x < 10; ++x) step.at(y, x) = 1.0f;
    const GrayImage out = bilateral_filter(step, 2.0, 0.1, 5);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) {
            if (x <= 2) CHECK(std::abs(out.at(y, x) - 0.0f) < 0.05f);
            if (x >= 7) CHECK(std::abs(out.at(y, x) - 1.0f) < 0.05f);
        }

    CHECK_THROWS_AS(bilateral_filter(img, -1.0, 0.1, 5), std::invalid_argument);
    CHECK_THROWS_AS(bilateral_filter(img, 2.0, 0.0, 5), std::invalid_argument);

    check_images_close(bilateral_filter(img, 2.0, 0.1, 5), oracle::bilateral_ref(img, 2.0, 0.1, 5),
                       1e-6);
}

TEST_CASE("wiener_filter: constants, flat-region smoothing, brute-force match") {
    check_constant(wiener_filter(GrayImage(9, 9, 0.55f), 3), 0.55f, 1e-7);

    // flat left half, noisy right half: the flat interior collapses to its
    // local mean because sigma^2 < nu^2 there
    GrayImage half(12, 24, 0.4f);
    Rng rng(205);
    for (int y = 0; y < 12; ++y)
        for (int x = 12; x < 24; ++x)
            half.at(y, x) = static_cast<float>(0.5 + 0.4 * (rng.next_unit() - 0.5));
    const GrayImage out = wiener_filter(half, 3);
    for (int y = 2; y < 10; ++y)
        for (int x = 2; x < 9; ++x) CHECK(out.at(y, x) == doctest::Approx(0.4).epsilon(1e-6));

    const GrayImage img = oracle::random_image(5, 5, 206);
    check_images_close(wiener_filter(img, 3), oracle::wiener_ref(img, 3), 1e-6);

    CHECK_THROWS_AS(wiener_filter(img, 2), std::invalid_argument);
}

TEST_CASE("anisotropic_diffusion: identity cases and a hand-traced step") {
    const GrayImage img = oracle::random_image(6, 6, 207);
    const GrayImage zero_iter = anisotropic_diffusion(img, 0, 0.1, 0.25);
    CHECK(zero_iter.pixels == img.pixels);

    check_constant(anisotropic_diffusion(GrayImage(8, 8, 0.77f), 10, 0.1, 0.25), 0.77f, 1e-7);

    // 3x3 hand trace: center pixel update from its four neighbours
    GrayImage tiny(3, 3, 0.0f);
    tiny.at(0, 1) = 0.2f;
    tiny.at(1, 0) = 0.4f;
    tiny.at(1, 1) = 0.5f;
    tiny.at(1, 2) = 0.6f;
    tiny.at(2, 1) = 0.8f;
    const double kappa = 0.3, lambda = 0.2;
    auto flow_term = [&](double ngh, double c0) {
        const double d = ngh - c0;
        return std::exp(-(d / kappa) * (d / kappa)) * d;
    };
    const double c0 = 0.5;
    const double expected_center =
        c0 + lambda * (flow_term(0.2, c0) + flow_term(0.8, c0) + flow_term(0.6, c0) +
                       flow_term(0.4, c0));
    const GrayImage one = anisotropic_diffusion(tiny, 1, kappa, lambda);
    CHECK(one.at(1, 1) == doctest::Approx(expected_center).epsilon(1e-6));
    check_images_close(one, oracle::perona_malik_step_ref(tiny, kappa, lambda), 1e-6);

    CHECK_THROWS_AS(anisotropic_diffusion(img, 5, 0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(anisotropic_diffusion(img, 5, 0.1, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(anisotropic_diffusion(img, 5, 0.0, 0.25), std::invalid_argument);
}

TEST_CASE("all six filters keep [0,1] images in [0,1]") {
    for (int trial = 0; trial < 5; ++trial) {
        const GrayImage img = oracle::random_image(16, 16, 300 + static_cast<std::uint64_t>(trial));
        const GrayImage outs[6] = {
            median_filter(img, 3),          average_filter(img, 3),
            gaussian_filter(img, 1.0, 5),   bilateral_filter(img, 2.0, 0.1, 5),
            wiener_filter(img, 3),          anisotropic_diffusion(img, 10, 0.1, 0.25),
        };
        for (const auto& out : outs)
            for (float p : out.pixels) {
                CHECK(p >= 0.0f);
                CHECK(p <= 1.0f);
            }
    }
}

TEST_CASE("filters match their brute-force definitions on random 7x7 images") {
    for (int trial = 0; trial < 5; ++trial) {
        const GrayImage img = oracle::random_image(7, 7, 400 + static_cast<std::uint64_t>(trial));
        check_images_close(median_filter(img, 3), oracle::median_ref(img, 3), 0.0);
        check_images_close(average_filter(img, 3), oracle::average_ref(img, 3), 1e-6);
        check_images_close(gaussian_filter(img, 1.0, 5), oracle::gaussian_dense_ref(img, 1.0, 5),
                           1e-6);
        check_images_close(bilateral_filter(img, 2.0, 0.1, 5),
                           oracle::bilateral_ref(img, 2.0, 0.1, 5), 1e-6);
        check_images_close(wiener_filter(img, 3), oracle::wiener_ref(img, 3), 1e-6);
        check_images_close(anisotropic_diffusion(img, 1, 0.1, 0.25),
                           oracle::perona_malik_step_ref(img, 0.1, 0.25), 1e-6);
    }
}

TEST_CASE("median_filter commutes with a monotone intensity remap") {
    const GrayImage img = oracle::random_image(9, 9, 500);
    auto remap = [](const GrayImage& in) {
        GrayImage out = in;
        for (float& p : out.pixels) p = p * p; // strictly increasing on [0,1]
        return out;
    };
    const GrayImage a = median_filter(remap(img), 3);
    const GrayImage b = remap(median_filter(img, 3));
    check_images_close(a, b, 1e-7);
}
