#include "sbench/bench.hpp"
#include "sbench/noise.hpp"
#include "sbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace sbench {

namespace {

constexpr std::uint64_t kTagBenchNoise = 101;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
    if (pos != v.size())
        throw ConfigError("config: '" + key + "' has trailing junk in '" + v + "'");
    return d;
}

long parse_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long n = 0;
    try {
        n = std::stol(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
    if (pos != v.size())
        throw ConfigError("config: '" + key + "' has trailing junk in '" + v + "'");
    return n;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    std::uint64_t n = 0;
    try {
        n = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects an unsigned integer, got '" + v + "'");
    }
    if (pos != v.size())
        throw ConfigError("config: '" + key + "' has trailing junk in '" + v + "'");
    return n;
}

std::vector<std::string> normalize_methods(const std::vector<std::string>& requested) {
    const auto& reg = method_registry();
    for (const auto& m : requested)
        if (std::find(reg.begin(), reg.end(), m) == reg.end())
            throw ConfigError("config: unknown method '" + m + "'");
    std::vector<std::string> out;
    for (const auto& m : reg)
        if (std::find(requested.begin(), requested.end(), m) != requested.end()) out.push_back(m);
    return out;
}

std::string fmt_double(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string variance_tag(double v) { return fmt_double("%g", v); }

struct Paths {
    fs::path out;
    explicit Paths(const BenchConfig& cfg) : out(cfg.out_dir) {}
    fs::path manifest() const { return out / "manifest.tsv"; }
    fs::path phantoms() const { return out / "phantoms"; }
    fs::path checkpoint(bool skip) const {
        return out / (skip ? "ae_skip.ckpt" : "ae_noskip.ckpt");
    }
    fs::path history(bool skip) const {
        return out / (skip ? "history_ae_skip.csv" : "history_ae_noskip.csv");
    }
    fs::path results_csv() const { return out / "results.csv"; }
    fs::path results_md() const { return out / "results.md"; }
    fs::path curves() const { return out / "curves.tsv"; }
    fs::path panel(double variance) const {
        return out / ("panel_v" + variance_tag(variance) + ".png");
    }
};

// Runs one registered method on a noisy image.
struct MethodRunner {
    const FilterConfig& f;
    const Network* skip_net = nullptr;
    const Network* noskip_net = nullptr;

    GrayImage operator()(const std::string& name, const GrayImage& noisy) const {
        if (name == "median") return median_filter(noisy, f.median_kernel);
        if (name == "average") return average_filter(noisy, f.average_kernel);
        if (name == "gaussian") return gaussian_filter(noisy, f.gaussian_sigma, f.gaussian_kernel);
        if (name == "bilateral")
            return bilateral_filter(noisy, f.bilateral_sigma_spatial, f.bilateral_sigma_range,
                                    f.bilateral_kernel);
        if (name == "wiener") return wiener_filter(noisy, f.wiener_window);
        if (name == "anisotropic")
            return anisotropic_diffusion(noisy, f.pm_iterations, f.pm_kappa, f.pm_lambda);
        if (name == "ae_skip") return denoise(*skip_net, noisy);
        if (name == "ae_noskip") return denoise(*noskip_net, noisy);
        throw ConfigError("unknown method '" + name + "'");
    }
};

std::uint64_t bench_noise_seed(std::uint64_t seed, std::size_t manifest_index,
                               std::size_t variance_index) {
    return mix_seed(seed, kTagBenchNoise,
                    mix_seed(static_cast<std::uint64_t>(manifest_index),
                             static_cast<std::uint64_t>(variance_index)));
}

bool needs_ae(const std::vector<std::string>& methods, bool skip) {
    const std::string name = skip ? "ae_skip" : "ae_noskip";
    return std::find(methods.begin(), methods.end(), name) != methods.end();
}

std::optional<Network> load_net_if(const BenchConfig& cfg, bool skip) {
    if (!needs_ae(cfg.methods, skip)) return std::nullopt;
    const Paths paths(cfg);
    const fs::path p = paths.checkpoint(skip);
    if (!fs::exists(p))
        throw DataError("missing checkpoint '" + p.string() + "' (run the train command first)");
    return Network::from_checkpoint(load_checkpoint(p.string()));
}

GrayImage make_panel(const std::vector<GrayImage>& tiles) {
    const int s = tiles.front().height;
    const int n = static_cast<int>(tiles.size());
    GrayImage panel(s, n * s + (n - 1), 1.0f); // 1-pixel white separators
    for (int t = 0; t < n; ++t) {
        const int x0 = t * (s + 1);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) panel.at(y, x0 + x) = tiles[static_cast<std::size_t>(t)].at(y, x);
    }
    return panel;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path.string() + "'");
    f << text;
}

} // namespace

const std::vector<std::string>& method_registry() {
    static const std::vector<std::string> reg = {"ae_noskip", "ae_skip",  "median",
                                                 "gaussian",  "average",  "bilateral",
                                                 "wiener",    "anisotropic"};
    return reg;
}

TrainConfig BenchConfig::train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.noise_variances = variances;
    t.seed = seed;
    t.patience = patience;
    return t;
}

NetworkConfig BenchConfig::network_config(bool use_skip) const {
    NetworkConfig n;
    n.use_skip = use_skip;
    n.base_channels = base_channels;
    n.input_size = 128;
    return n;
}

BenchConfig parse_config_text(const std::string& text, BenchConfig base) {
    BenchConfig cfg = std::move(base);
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "dataset.root") {
            cfg.dataset_root = value;
        } else if (key == "dataset.phantom_count") {
            cfg.phantom_count = static_cast<int>(parse_int(key, value));
        } else if (key == "seed") {
            cfg.seed = parse_u64(key, value);
        } else if (key == "noise.variances") {
            cfg.variances.clear();
            for (const auto& item : split_list(value)) cfg.variances.push_back(parse_double(key, item));
            if (cfg.variances.empty())
                throw ConfigError("config: 'noise.variances' must list at least one value");
        } else if (key == "methods") {
            cfg.methods = normalize_methods(split_list(value));
            if (cfg.methods.empty()) throw ConfigError("config: 'methods' must not be empty");
        } else if (key == "filters.median.kernel") {
            cfg.filters.median_kernel = static_cast<int>(parse_int(key, value));
        } else if (key == "filters.average.kernel") {
            cfg.filters.average_kernel = static_cast<int>(parse_int(key, value));
        } else if (key == "filters.gaussian.sigma") {
            cfg.filters.gaussian_sigma = parse_double(key, value);
        } else if (key == "filters.gaussian.kernel") {
            cfg.filters.gaussian_kernel = static_cast<int>(parse_int(key, value));
        } else if (key == "filters.bilateral.sigma_spatial") {
            cfg.filters.bilateral_sigma_spatial = parse_double(key, value);
        } else if (key == "filters.bilateral.sigma_range") {
            cfg.filters.bilateral_sigma_range = parse_double(key, value);
        } else if (key == "filters.bilateral.kernel") {
            cfg.filters.bilateral_kernel = static_cast<int>(parse_int(key, value));
        } else if (key == "filters.wiener.window") {
            cfg.filters.wiener_window = static_cast<int>(parse_int(key, value));
        } else if (key == "filters.anisotropic.iterations") {
            cfg.filters.pm_iterations = static_cast<int>(parse_int(key, value));
        } else if (key == "filters.anisotropic.kappa") {
            cfg.filters.pm_kappa = parse_double(key, value);
        } else if (key == "filters.anisotropic.lambda") {
            cfg.filters.pm_lambda = parse_double(key, value);
        } else if (key == "train.epochs") {
            cfg.epochs = static_cast<int>(parse_int(key, value));
        } else if (key == "train.batch_size") {
            cfg.batch_size = static_cast<int>(parse_int(key, value));
        } else if (key == "train.learning_rate") {
            cfg.learning_rate = static_cast<float>(parse_double(key, value));
        } else if (key == "train.base_channels") {
            cfg.base_channels = static_cast<int>(parse_int(key, value));
        } else if (key == "train.patience") {
            cfg.patience = static_cast<int>(parse_int(key, value));
        } else if (key == "out") {
            cfg.out_dir = value;
        } else {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }
    return cfg;
}

BenchConfig load_config(const std::string& path, BenchConfig base) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), std::move(base));
}

void apply_preset(BenchConfig& cfg, const std::string& preset) {
    if (preset == "desk") {
        // Shrunk so prepare+train+bench completes in minutes on a laptop.
        cfg.dataset_root.clear();
        cfg.phantom_count = 20;
        cfg.epochs = 48;
        cfg.batch_size = 4;
        cfg.base_channels = 8;
        cfg.learning_rate = 1e-3f;
    } else if (preset == "paper") {
        cfg.epochs = 300;
        cfg.batch_size = 64;
        cfg.base_channels = 32;
        cfg.learning_rate = 1e-3f;
    } else {
        throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");
    }
}

std::string cmd_prepare(const BenchConfig& cfg) {
    const Paths paths(cfg);
    fs::create_directories(paths.out);

    std::string root = cfg.dataset_root;
    if (root.empty()) {
        root = paths.phantoms().string();
        generate_phantom_corpus(cfg.phantom_count, cfg.seed, root);
    } else if (!fs::is_directory(root)) {
        throw DataError("dataset root '" + root + "' does not exist");
    }
    const DatasetManifest manifest = build_manifest(root, cfg.seed);
    save_manifest(manifest, paths.manifest().string());
    return paths.manifest().string();
}

TrainOutputs cmd_train(const BenchConfig& cfg) {
    const Paths paths(cfg);
    if (!fs::exists(paths.manifest()))
        throw DataError("missing manifest '" + paths.manifest().string() +
                        "' (run the prepare command first)");
    const DatasetManifest manifest = load_manifest(paths.manifest().string());

    TrainOutputs outs;
    for (const bool use_skip : {false, true}) {
        Network net(cfg.network_config(use_skip), cfg.seed);
        const TrainResult result = train(net, manifest, cfg.train_config());
        const std::string ckpt = paths.checkpoint(use_skip).string();
        save_checkpoint(result.best, ckpt);

        std::string csv = "epoch,train_loss,val_loss\n";
        for (std::size_t e = 0; e < result.history.train_loss.size(); ++e) {
            csv += std::to_string(e + 1) + "," +
                   fmt_double("%.9e", result.history.train_loss[e]) + "," +
                   fmt_double("%.9e", result.history.val_loss[e]) + "\n";
        }
        const std::string hist = paths.history(use_skip).string();
        write_text_file(hist, csv);
        (use_skip ? outs.skip_checkpoint : outs.noskip_checkpoint) = ckpt;
        (use_skip ? outs.skip_history : outs.noskip_history) = hist;
    }
    return outs;
}

std::string results_csv_header() { return "method,variance,psnr_db,ssim,mse,n_images,seed"; }

std::string format_results_row(const MetricsRow& row) {
    std::string psnr_s = std::isinf(row.psnr_db) ? "inf" : fmt_double("%.6f", row.psnr_db);
    return row.method + "," + variance_tag(row.variance) + "," + psnr_s + "," +
           fmt_double("%.6f", row.ssim) + "," + fmt_double("%.8f", row.mse) + "," +
           std::to_string(row.n_images) + "," + std::to_string(row.seed);
}

std::vector<MetricsRow> parse_results_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open results CSV '" + path + "'");
    std::string line;
    if (!std::getline(f, line) || trim(line) != results_csv_header())
        throw DataError("results CSV '" + path + "' has an unexpected header");
    std::vector<MetricsRow> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split_list(line);
        if (fields.size() != 7)
            throw DataError("results CSV '" + path + "' line " + std::to_string(lineno) +
                            ": expected 7 fields");
        MetricsRow r;
        r.method = fields[0];
        r.variance = parse_double("variance", fields[1]);
        r.psnr_db = fields[2] == "inf" ? std::numeric_limits<double>::infinity()
                                       : parse_double("psnr_db", fields[2]);
        r.ssim = parse_double("ssim", fields[3]);
        r.mse = parse_double("mse", fields[4]);
        r.n_images = static_cast<int>(parse_int("n_images", fields[5]));
        r.seed = parse_u64("seed", fields[6]);
        rows.push_back(std::move(r));
    }
    return rows;
}

ReportBundle cmd_bench(const BenchConfig& cfg) {
    const Paths paths(cfg);
    if (!fs::exists(paths.manifest()))
        throw DataError("missing manifest '" + paths.manifest().string() +
                        "' (run the prepare command first)");
    const DatasetManifest manifest = load_manifest(paths.manifest().string());

    // Test images with their position in the full manifest (noise sub-seeds
    // key off the manifest index so panel and bench agree).
    std::vector<GrayImage> cleans;
    std::vector<std::size_t> manifest_idx;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (manifest.entries[i].split != Split::test) continue;
        cleans.push_back(resize_bilinear(load_png(manifest.entries[i].path), 128, 128));
        manifest_idx.push_back(i);
    }
    if (cleans.empty()) throw DataError("manifest has no test images");

    const std::optional<Network> skip_net = load_net_if(cfg, true);
    const std::optional<Network> noskip_net = load_net_if(cfg, false);
    const MethodRunner run{cfg.filters, skip_net ? &*skip_net : nullptr,
                           noskip_net ? &*noskip_net : nullptr};

    ReportBundle bundle;
    std::string csv = results_csv_header() + "\n";
    std::map<double, std::vector<MetricsRow>> by_variance;

    for (std::size_t v = 0; v < cfg.variances.size(); ++v) {
        const double variance = cfg.variances[v];
        std::vector<GrayImage> noisies;
        noisies.reserve(cleans.size());
        for (std::size_t i = 0; i < cleans.size(); ++i) {
            const NoiseSpec spec{variance, bench_noise_seed(cfg.seed, manifest_idx[i], v)};
            noisies.push_back(add_speckle(cleans[i], spec));
        }

        std::vector<GrayImage> panel_tiles = {cleans.front(), noisies.front()};
        for (const auto& method : cfg.methods) {
            std::vector<GrayImage> outputs;
            outputs.reserve(cleans.size());
            for (const auto& noisy : noisies) outputs.push_back(run(method, noisy));
            MetricsRow row = evaluate_method(cleans, outputs, method, variance, cfg.seed);
            csv += format_results_row(row) + "\n";
            by_variance[variance].push_back(row);
            bundle.rows.push_back(std::move(row));
            panel_tiles.push_back(std::move(outputs.front()));
        }

        const fs::path panel_path = paths.panel(variance);
        save_png(make_panel(panel_tiles), panel_path.string());
        bundle.panel_pngs.push_back(panel_path.string());
    }

    write_text_file(paths.results_csv(), csv);
    bundle.results_csv = paths.results_csv().string();

    // Table-I-shaped markdown report, one block per variance.
    std::string md = "# Speckle denoising benchmark\n\nseed " + std::to_string(cfg.seed) +
                     ", " + std::to_string(cleans.size()) + " test images\n";
    for (const auto& variance : cfg.variances) {
        md += "\n## Variance " + variance_tag(variance) + "\n\n";
        md += "| Method | PSNR (dB) | SSIM | MSE |\n|---|---|---|---|\n";
        for (const auto& row : by_variance[variance]) {
            const std::string psnr_s =
                std::isinf(row.psnr_db) ? "inf" : fmt_double("%.3f", row.psnr_db);
            md += "| " + row.method + " | " + psnr_s + " | " + fmt_double("%.3f", row.ssim) +
                  " | " + fmt_double("%.3f", row.mse) + " |\n";
        }
    }
    write_text_file(paths.results_md(), md);
    bundle.results_md = paths.results_md().string();

    bundle.curves_file = cmd_curves(cfg, bundle.results_csv);
    return bundle;
}

std::string cmd_panel(const BenchConfig& cfg, const std::string& image_id, double variance) {
    const Paths paths(cfg);
    if (!fs::exists(paths.manifest()))
        throw DataError("missing manifest '" + paths.manifest().string() +
                        "' (run the prepare command first)");
    const DatasetManifest manifest = load_manifest(paths.manifest().string());

    std::size_t found = manifest.entries.size();
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (e.path == image_id || fs::path(e.path).stem().string() == image_id) {
            found = i;
            break;
        }
    }
    if (found == manifest.entries.size())
        throw DataError("unknown image id '" + image_id + "' (not in the manifest)");

    std::size_t v = cfg.variances.size();
    for (std::size_t i = 0; i < cfg.variances.size(); ++i)
        if (std::abs(cfg.variances[i] - variance) < 1e-12) v = i;
    if (v == cfg.variances.size())
        throw DataError("variance " + variance_tag(variance) + " is not in the configured grid");

    const GrayImage clean = resize_bilinear(load_png(manifest.entries[found].path), 128, 128);
    const NoiseSpec spec{variance, bench_noise_seed(cfg.seed, found, v)};
    const GrayImage noisy = add_speckle(clean, spec);

    const std::optional<Network> skip_net = load_net_if(cfg, true);
    const std::optional<Network> noskip_net = load_net_if(cfg, false);
    const MethodRunner run{cfg.filters, skip_net ? &*skip_net : nullptr,
                           noskip_net ? &*noskip_net : nullptr};

    std::vector<GrayImage> tiles = {clean, noisy};
    for (const auto& method : cfg.methods) tiles.push_back(run(method, noisy));

    const std::string stem = fs::path(manifest.entries[found].path).stem().string();
    const fs::path out = paths.out / ("panel_" + stem + "_v" + variance_tag(variance) + ".png");
    save_png(make_panel(tiles), out.string());
    return out.string();
}

std::string cmd_curves(const BenchConfig& cfg, const std::string& results_csv) {
    const std::vector<MetricsRow> rows = parse_results_csv(results_csv);

    // Fig. 3 legend order first, then the remaining methods.
    static const std::vector<std::string> curve_order = {"ae_skip", "ae_noskip", "gaussian",
                                                         "average", "bilateral", "median",
                                                         "wiener",  "anisotropic"};
    std::string out_text;
    for (const auto& method : curve_order) {
        std::vector<const MetricsRow*> series;
        for (const auto& r : rows)
            if (r.method == method) series.push_back(&r);
        if (series.empty()) continue;
        std::sort(series.begin(), series.end(),
                  [](const MetricsRow* a, const MetricsRow* b) { return a->variance < b->variance; });
        out_text += "# method=" + method + "\n";
        for (const auto* r : series)
            out_text += variance_tag(r->variance) + "\t" + fmt_double("%.6f", r->ssim) + "\n";
    }

    const Paths paths(cfg);
    fs::create_directories(paths.out);
    write_text_file(paths.curves(), out_text);
    return paths.curves().string();
}

} // namespace sbench
