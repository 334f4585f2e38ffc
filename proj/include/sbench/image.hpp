#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbench {

struct ImageError : std::runtime_error {
    explicit ImageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Grayscale image with unit-range intensities, row-major.
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    GrayImage() = default;
    GrayImage(int h, int w, float fill = 0.0f)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

    float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
    float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
    int size() const { return height * width; }
};

enum class Split { train, val, test };

const char* split_name(Split s);

struct ManifestEntry {
    std::string path;
    std::string label; // normal | benign | malignant
    Split split = Split::train;
};

// Deterministic dataset listing: lexicographic ordering, seeded shuffle,
// floor-based 0.70/0.15/0.15 allocation with the remainder going to train.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;

    std::vector<const ManifestEntry*> in_split(Split s) const;
};

// Decodes an 8- or 16-bit gray/RGB(A)/palette PNG to unit range. RGB collapses
// by Rec.601 luminance (0.299 R + 0.587 G + 0.114 B); alpha is ignored.
GrayImage load_png(const std::string& path);

// 8-bit grayscale PNG, quantized round(p*255) with round-half-up.
void save_png(const GrayImage& img, const std::string& path);

// Bilinear resampling with half-pixel-center alignment.
GrayImage resize_bilinear(const GrayImage& img, int out_h = 128, int out_w = 128);

// Scans root_dir/<class>/*.png (mask files, suffix "_mask", excluded) and
// assigns splits from the seed.
DatasetManifest build_manifest(const std::string& root_dir, std::uint64_t seed);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Writes n synthetic 500x500 ultrasound-style phantoms (smooth background
// plus soft-edged elliptical lesions) under out_dir/<class>/, deterministic
// in the seed. Substitutes for a real corpus at desk scale.
void generate_phantom_corpus(int n, std::uint64_t seed, const std::string& out_dir);

} // namespace sbench
