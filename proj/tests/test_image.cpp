#include <doctest.h>

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "sbench/image.hpp"
#include "temp_dir.hpp"

using namespace sbench;
namespace fs = std::filesystem;

namespace {

// Test-only PNG writer for color/bit-depth variants save_png cannot produce.
void write_png_raw(const std::string& path, int w, int h, int color_type, int depth,
                   const std::vector<unsigned char>& bytes) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE(setjmp(png_jmpbuf(png)) == 0);
    png_init_io(png, f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    int channels = 1;
    if (color_type == PNG_COLOR_TYPE_RGB) channels = 3;
    if (color_type == PNG_COLOR_TYPE_RGBA) channels = 4;
    const std::size_t stride = static_cast<std::size_t>(w) * channels * (depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(bytes.data() + y * stride);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

void touch(const fs::path& p) { std::ofstream(p).put('\0'); }

} // namespace

TEST_CASE("save_png quantization: endpoints and round-half-up midpoint") {
    TempDir tmp("png_quant");
    GrayImage img(2, 2);
    img.at(0, 0) = 0.0f;
    img.at(0, 1) = 1.0f;
    img.at(1, 0) = 0.5f; // 127.5 rounds up to 128
    img.at(1, 1) = 0.25f;
    save_png(img, tmp.str("q.png"));
    const GrayImage back = load_png(tmp.str("q.png"));
    CHECK(back.at(0, 0) == 0.0f);
    CHECK(back.at(0, 1) == 1.0f);
    CHECK(back.at(1, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-7));
    CHECK(back.at(1, 1) == doctest::Approx(std::round(0.25 * 255.0) / 255.0).epsilon(1e-7));
}

TEST_CASE("load_png(save_png(img)) round-trips within 1/255 per pixel") {
    TempDir tmp("png_roundtrip");
    const GrayImage img = oracle::random_image(33, 47, 7);
    save_png(img, tmp.str("rt.png"));
    const GrayImage back = load_png(tmp.str("rt.png"));
    REQUIRE(back.height == img.height);
    REQUIRE(back.width == img.width);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 1.0f / 255.0f);
}

TEST_CASE("load_png collapses RGB by Rec.601") {
    TempDir tmp("png_rgb");
    // 1x3 RGB: red, white, mid gray
    std::vector<unsigned char> px = {255, 0, 0, 255, 255, 255, 128, 128, 128};
    write_png_raw(tmp.str("rgb.png"), 3, 1, PNG_COLOR_TYPE_RGB, 8, px);
    const GrayImage img = load_png(tmp.str("rgb.png"));
    CHECK(img.at(0, 0) == doctest::Approx(0.299).epsilon(1e-6));
    CHECK(img.at(0, 1) == doctest::Approx(1.0));
    CHECK(img.at(0, 2) == doctest::Approx(128.0 / 255.0).epsilon(1e-6));

    // alpha is ignored
    std::vector<unsigned char> rgba = {0, 255, 0, 10};
    write_png_raw(tmp.str("rgba.png"), 1, 1, PNG_COLOR_TYPE_RGBA, 8, rgba);
    CHECK(load_png(tmp.str("rgba.png")).at(0, 0) == doctest::Approx(0.587).epsilon(1e-6));
}

TEST_CASE("load_png scales 16-bit gray to unit range") {
    TempDir tmp("png_16");
    // big-endian 16-bit samples: 0, 65535, 32768
    std::vector<unsigned char> px = {0x00, 0x00, 0xFF, 0xFF, 0x80, 0x00};
    write_png_raw(tmp.str("g16.png"), 3, 1, PNG_COLOR_TYPE_GRAY, 16, px);
    const GrayImage img = load_png(tmp.str("g16.png"));
    CHECK(img.at(0, 0) == 0.0f);
    CHECK(img.at(0, 1) == 1.0f);
    CHECK(img.at(0, 2) == doctest::Approx(32768.0 / 65535.0).epsilon(1e-7));
}

TEST_CASE("load_png errors carry the path") {
    TempDir tmp("png_err");
    CHECK_THROWS_WITH_AS(load_png(tmp.str("missing.png")),
                         doctest::Contains("missing.png"), ImageError);
    std::ofstream(tmp.str("junk.png"), std::ios::binary) << "not a png at all";
    CHECK_THROWS_AS(load_png(tmp.str("junk.png")), ImageError);
}

TEST_CASE("resize_bilinear: constants, identity, and checkerboard symmetry") {
    GrayImage flat(5, 9, 0.37f);
    const GrayImage up = resize_bilinear(flat, 128, 128);
    for (float p : up.pixels) CHECK(p == doctest::Approx(0.37f).epsilon(1e-6));

    const GrayImage img = oracle::random_image(17, 13, 9);
    const GrayImage same = resize_bilinear(img, 17, 13);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(same.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-6));

    GrayImage checker(2, 2);
    checker.at(0, 0) = 0.0f;
    checker.at(0, 1) = 1.0f;
    checker.at(1, 0) = 1.0f;
    checker.at(1, 1) = 0.0f;
    const GrayImage big = resize_bilinear(checker, 4, 4);
    for (float p : big.pixels) {
        CHECK(p >= 0.0f);
        CHECK(p <= 1.0f);
    }
    // the input equals its own 180-degree rotation, so the output must too
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(big.at(y, x) == doctest::Approx(big.at(3 - y, 3 - x)).epsilon(1e-6));

    CHECK_THROWS_AS(resize_bilinear(GrayImage(1, 5), 4, 4), ImageError);
}

TEST_CASE("build_manifest reproduces the 546/117/117 split for 780 images") {
    TempDir tmp("manifest_780");
    const char* classes[3] = {"benign", "malignant", "normal"};
    const int counts[3] = {437, 210, 133}; // class sizes of the 780-image corpus
    for (int c = 0; c < 3; ++c) {
        fs::create_directories(tmp.path / classes[c]);
        for (int i = 0; i < counts[c]; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "img_%03d.png", i);
            touch(tmp.path / classes[c] / name);
            std::snprintf(name, sizeof(name), "img_%03d_mask.png", i);
            touch(tmp.path / classes[c] / name); // must be excluded
        }
    }
    const DatasetManifest m = build_manifest(tmp.str(), 1234);
    CHECK(m.entries.size() == 780);
    CHECK(m.in_split(Split::train).size() == 546);
    CHECK(m.in_split(Split::val).size() == 117);
    CHECK(m.in_split(Split::test).size() == 117);
    for (const auto& e : m.entries) CHECK(e.path.find("_mask") == std::string::npos);
}

TEST_CASE("build_manifest floor allocation sends the remainder to train") {
    TempDir tmp("manifest_10");
    fs::create_directories(tmp.path / "normal");
    for (int i = 0; i < 10; ++i) touch(tmp.path / "normal" / ("p" + std::to_string(i) + ".png"));
    const DatasetManifest m = build_manifest(tmp.str(), 5);
    CHECK(m.in_split(Split::train).size() == 8); // floor(1.5)=1 val, 1 test, remainder to train
    CHECK(m.in_split(Split::val).size() == 1);
    CHECK(m.in_split(Split::test).size() == 1);
}

TEST_CASE("build_manifest is deterministic and persists byte-identically") {
    TempDir tmp("manifest_det");
    fs::create_directories(tmp.path / "benign");
    for (int i = 0; i < 12; ++i) touch(tmp.path / "benign" / ("b" + std::to_string(i) + ".png"));

    const DatasetManifest a = build_manifest(tmp.str(), 77);
    const DatasetManifest b = build_manifest(tmp.str(), 77);
    save_manifest(a, tmp.str("a.tsv"));
    save_manifest(b, tmp.str("b.tsv"));
    CHECK(slurp(tmp.str("a.tsv")) == slurp(tmp.str("b.tsv")));

    const DatasetManifest c = build_manifest(tmp.str(), 78);
    bool same_assignment = true;
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        if (a.entries[i].split != c.entries[i].split) same_assignment = false;
    CHECK_FALSE(same_assignment);

    const DatasetManifest back = load_manifest(tmp.str("a.tsv"));
    CHECK(back.seed == a.seed);
    REQUIRE(back.entries.size() == a.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(back.entries[i].path == a.entries[i].path);
        CHECK(back.entries[i].label == a.entries[i].label);
        CHECK(back.entries[i].split == a.entries[i].split);
    }
}

TEST_CASE("build_manifest rejects an empty corpus") {
    TempDir tmp("manifest_empty");
    CHECK_THROWS_AS(build_manifest(tmp.str(), 1), ImageError);
}

TEST_CASE("generate_phantom_corpus: stable names, reproducible bytes, unit range") {
    TempDir tmp("phantoms");
    generate_phantom_corpus(4, 99, tmp.str("a"));
    generate_phantom_corpus(4, 99, tmp.str("b"));
    generate_phantom_corpus(4, 100, tmp.str("c"));

    const std::vector<std::string> expect = {
        "benign/phantom_0000.png",
        "malignant/phantom_0001.png",
        "normal/phantom_0002.png",
        "benign/phantom_0003.png",
    };
    for (const auto& rel : expect) {
        CAPTURE(rel);
        REQUIRE(fs::exists(tmp.path / "a" / rel));
        CHECK(slurp((tmp.path / "a" / rel).string()) == slurp((tmp.path / "b" / rel).string()));
    }
    CHECK(slurp((tmp.path / "a" / expect[0]).string()) !=
          slurp((tmp.path / "c" / expect[0]).string()));

    const GrayImage img = load_png((tmp.path / "a" / expect[0]).string());
    CHECK(img.height == 500);
    CHECK(img.width == 500);
    for (float p : img.pixels) {
        CHECK(p >= 0.0f);
        CHECK(p <= 1.0f);
    }

    CHECK_THROWS_AS(generate_phantom_corpus(0, 1, tmp.str("d")), ImageError);
}
