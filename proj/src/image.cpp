#include "sbench/image.hpp"
#include "sbench/rng.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace sbench {

namespace {

struct FileCloser {
    std::FILE* f = nullptr;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

float luminance601(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

bool is_mask_file(const fs::path& p) {
    const std::string stem = p.stem().string();
    const std::string suffix = "_mask";
    // BUSI masks are "<name>_mask.png" or "<name>_mask_1.png".
    return stem.find(suffix) != std::string::npos;
}

} // namespace

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

std::vector<const ManifestEntry*> DatasetManifest::in_split(Split s) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.split == s) out.push_back(&e);
    return out;
}

GrayImage load_png(const std::string& path) {
    FileCloser fc;
    fc.f = std::fopen(path.c_str(), "rb");
    if (!fc.f) throw ImageError("load_png: cannot open '" + path + "'");

    png_byte header[8];
    if (std::fread(header, 1, 8, fc.f) != 8 || png_sig_cmp(header, 0, 8))
        throw ImageError("load_png: '" + path + "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("load_png: libpng init failed for '" + path + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("load_png: decode error in '" + path + "'");
    }

    png_init_io(png, fc.f);
    png_set_sig_bytes(png, 8);
    // Expand palette/low-bit-depth to 8-bit gray or RGB; keep 16-bit as-is
    // but convert to host byte order.
    const int transforms = PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_SWAP_ENDIAN;
    png_read_png(png, info, transforms, nullptr);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    const png_byte channels = png_get_channels(png, info);
    png_bytepp rows = png_get_rows(png, info);

    if ((depth != 8 && depth != 16) || channels < 1 || channels > 4) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("load_png: unsupported color layout (depth " + std::to_string(depth) +
                         ", channels " + std::to_string(channels) + ") in '" + path + "'");
    }

    GrayImage img(static_cast<int>(height), static_cast<int>(width));
    const float scale = depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
    for (png_uint_32 y = 0; y < height; ++y) {
        float* dst = img.pixels.data() + static_cast<std::size_t>(y) * width;
        if (depth == 8) {
            const png_bytep row = rows[y];
            for (png_uint_32 x = 0; x < width; ++x) {
                const png_bytep px = row + x * channels;
                if (channels <= 2) {
                    dst[x] = px[0] * scale;
                } else {
                    dst[x] = luminance601(px[0] * scale, px[1] * scale, px[2] * scale);
                }
            }
        } else {
            const png_uint_16p row = reinterpret_cast<png_uint_16p>(rows[y]);
            for (png_uint_32 x = 0; x < width; ++x) {
                const png_uint_16p px = row + x * channels;
                if (channels <= 2) {
                    dst[x] = px[0] * scale;
                } else {
                    dst[x] = luminance601(px[0] * scale, px[1] * scale, px[2] * scale);
                }
            }
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const GrayImage& img, const std::string& path) {
    if (img.height <= 0 || img.width <= 0)
        throw ImageError("save_png: empty image for '" + path + "'");

    std::vector<png_byte> bytes(static_cast<std::size_t>(img.height) * img.width);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const float q = std::floor(img.pixels[i] * 255.0f + 0.5f); // round half up
        bytes[i] = static_cast<png_byte>(std::clamp(q, 0.0f, 255.0f));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = bytes.data() + static_cast<std::size_t>(y) * img.width;

    FileCloser fc;
    fc.f = std::fopen(path.c_str(), "wb");
    if (!fc.f) throw ImageError("save_png: cannot write '" + path + "'");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("save_png: libpng init failed for '" + path + "'");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("save_png: encode error for '" + path + "'");
    }

    png_init_io(png, fc.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w) {
    if (img.height < 2 || img.width < 2)
        throw ImageError("resize_bilinear: source must be at least 2x2, got " +
                         std::to_string(img.height) + "x" + std::to_string(img.width));
    if (out_h < 1 || out_w < 1)
        throw ImageError("resize_bilinear: degenerate target " + std::to_string(out_h) + "x" +
                         std::to_string(out_w));

    GrayImage out(out_h, out_w);
    const float sy = static_cast<float>(img.height) / out_h;
    const float sx = static_cast<float>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        float fy = (y + 0.5f) * sy - 0.5f;
        fy = std::clamp(fy, 0.0f, static_cast<float>(img.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const float wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            float fx = (x + 0.5f) * sx - 0.5f;
            fx = std::clamp(fx, 0.0f, static_cast<float>(img.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const float wx = fx - x0;
            const float top = img.at(y0, x0) * (1.0f - wx) + img.at(y0, x1) * wx;
            const float bot = img.at(y1, x0) * (1.0f - wx) + img.at(y1, x1) * wx;
            out.at(y, x) = top * (1.0f - wy) + bot * wy;
        }
    }
    return out;
}

DatasetManifest build_manifest(const std::string& root_dir, std::uint64_t seed) {
    static const char* kClasses[] = {"benign", "malignant", "normal"};
    DatasetManifest m;
    m.seed = seed;

    for (const char* cls : kClasses) {
        const fs::path dir = fs::path(root_dir) / cls;
        if (!fs::is_directory(dir)) continue;
        for (const auto& de : fs::directory_iterator(dir)) {
            if (!de.is_regular_file()) continue;
            const fs::path& p = de.path();
            std::string ext = p.extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (ext != ".png" || is_mask_file(p)) continue;
            m.entries.push_back({p.string(), cls, Split::train});
        }
    }
    if (m.entries.empty())
        throw ImageError("build_manifest: no PNG images under '" + root_dir + "'");

    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });

    const std::size_t n = m.entries.size();
    const std::size_t n_val = static_cast<std::size_t>(0.15 * static_cast<double>(n));
    const std::size_t n_test = n_val;
    const std::size_t n_train = n - n_val - n_test;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
    }
    for (std::size_t k = 0; k < n; ++k) {
        Split s = Split::train;
        if (k >= n_train + n_val)
            s = Split::test;
        else if (k >= n_train)
            s = Split::val;
        m.entries[order[k]].split = s;
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ImageError("save_manifest: cannot write '" + path + "'");
    f << "# seed=" << m.seed << "\n";
    for (const auto& e : m.entries)
        f << e.path << "\t" << e.label << "\t" << split_name(e.split) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ImageError("load_manifest: cannot open '" + path + "'");
    DatasetManifest m;
    std::string line;
    if (!std::getline(f, line) || line.rfind("# seed=", 0) != 0)
        throw ImageError("load_manifest: missing '# seed=' header in '" + path + "'");
    m.seed = std::stoull(line.substr(7));
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw ImageError("load_manifest: malformed line '" + line + "' in '" + path + "'");
        ManifestEntry e;
        e.path = line.substr(0, t1);
        e.label = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string s = line.substr(t2 + 1);
        if (s == "train")
            e.split = Split::train;
        else if (s == "val")
            e.split = Split::val;
        else if (s == "test")
            e.split = Split::test;
        else
            throw ImageError("load_manifest: unknown split '" + s + "' in '" + path + "'");
        m.entries.push_back(std::move(e));
    }
    return m;
}

void generate_phantom_corpus(int n, std::uint64_t seed, const std::string& out_dir) {
    if (n < 1) throw ImageError("generate_phantom_corpus: n must be >= 1");
    static const char* kClasses[] = {"benign", "malignant", "normal"};
    std::error_code ec;
    for (const char* cls : kClasses) {
        fs::create_directories(fs::path(out_dir) / cls, ec);
        if (ec)
            throw ImageError("generate_phantom_corpus: cannot create '" + out_dir + "/" + cls + "'");
    }

    const int size = 500;
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        const char* cls = kClasses[i % 3];

        // Smooth background: base level, linear gradient, one broad bump.
        const float base = static_cast<float>(rng.next_uniform(0.3, 0.55));
        const float gx = static_cast<float>(rng.next_uniform(-0.2, 0.2));
        const float gy = static_cast<float>(rng.next_uniform(-0.2, 0.2));
        const float bump_x = static_cast<float>(rng.next_uniform(0.2, 0.8));
        const float bump_y = static_cast<float>(rng.next_uniform(0.2, 0.8));
        const float bump_a = static_cast<float>(rng.next_uniform(-0.1, 0.1));
        const float bump_s = static_cast<float>(rng.next_uniform(0.2, 0.5));

        GrayImage img(size, size);
        for (int y = 0; y < size; ++y) {
            const float v = (y + 0.5f) / size;
            for (int x = 0; x < size; ++x) {
                const float u = (x + 0.5f) / size;
                float val = base + gx * (u - 0.5f) + gy * (v - 0.5f);
                const float dbx = (u - bump_x) / bump_s;
                const float dby = (v - bump_y) / bump_s;
                val += bump_a * std::exp(-(dbx * dbx + dby * dby));
                img.at(y, x) = val;
            }
        }

        // Elliptical low/high-intensity structures at three scales, rendered
        // additively inside their support box. The dense tiny scatter gives
        // the clean images ultrasound-like fine texture beyond what a pooled
        // half-resolution code can carry.
        auto render_lesion = [&](float r_lo, float r_hi, float amp_abs_lo, float amp_abs_hi,
                                 bool bright) {
            const float cx = static_cast<float>(rng.next_uniform(0.05, 0.95));
            const float cy = static_cast<float>(rng.next_uniform(0.05, 0.95));
            const float rx = static_cast<float>(rng.next_uniform(r_lo, r_hi));
            const float ry = static_cast<float>(rng.next_uniform(r_lo, r_hi));
            const float theta = static_cast<float>(rng.next_uniform(0.0, 3.14159265));
            const float cos_t = std::cos(theta), sin_t = std::sin(theta);
            const float mag = static_cast<float>(rng.next_uniform(amp_abs_lo, amp_abs_hi));
            const float amp = bright ? mag : -mag;

            const float reach = 1.5f * std::max(rx, ry);
            const int x0 = std::max(0, static_cast<int>((cx - reach) * size));
            const int x1 = std::min(size - 1, static_cast<int>((cx + reach) * size) + 1);
            const int y0 = std::max(0, static_cast<int>((cy - reach) * size));
            const int y1 = std::min(size - 1, static_cast<int>((cy + reach) * size) + 1);
            for (int y = y0; y <= y1; ++y) {
                const float dv = (y + 0.5f) / size - cy;
                for (int x = x0; x <= x1; ++x) {
                    const float du = (x + 0.5f) / size - cx;
                    const float ex = (du * cos_t + dv * sin_t) / rx;
                    const float ey = (-du * sin_t + dv * cos_t) / ry;
                    const float r2 = ex * ex + ey * ey;
                    const float r4 = r2 * r2;
                    img.at(y, x) += amp * std::exp(-r4 * r4); // flat core, soft rim
                }
            }
        };

        // dominant lesions: bright for benign, dark for malignant, mixed for
        // normal tissue structure
        const bool bright_primary = std::string(cls) == "benign";
        const int n_primary = 1 + static_cast<int>(rng.next_below(2));
        for (int l = 0; l < n_primary; ++l)
            render_lesion(0.06f, 0.16f, 0.15f, 0.3f,
                          std::string(cls) == "normal" ? rng.next_below(2) == 0 : bright_primary);
        const int n_medium = 8 + static_cast<int>(rng.next_below(5));
        for (int l = 0; l < n_medium; ++l)
            render_lesion(0.015f, 0.05f, 0.1f, 0.25f, rng.next_below(2) == 0);
        const int n_tiny = 150 + static_cast<int>(rng.next_below(50));
        for (int l = 0; l < n_tiny; ++l)
            render_lesion(0.004f, 0.018f, 0.06f, 0.18f, rng.next_below(2) == 0);

        for (float& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);

        char name[32];
        std::snprintf(name, sizeof(name), "phantom_%04d.png", i);
        save_png(img, (fs::path(out_dir) / cls / name).string());
    }
}

} // namespace sbench
