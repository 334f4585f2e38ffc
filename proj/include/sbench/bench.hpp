#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbench/filters.hpp"
#include "sbench/image.hpp"
#include "sbench/metrics.hpp"
#include "sbench/net.hpp"

namespace sbench {

// Exit-code mapping: ConfigError -> 2, DataError (and ImageError) -> 3,
// TrainDivergence -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Fixed method registry in Fig.2 panel order; benchmark output is always
// emitted in this order.
const std::vector<std::string>& method_registry();

struct BenchConfig {
    std::string dataset_root;  // empty: synthesize a phantom corpus
    int phantom_count = 20;
    std::uint64_t seed = 42;
    std::vector<double> variances = canonical_variances();
    std::vector<std::string> methods = method_registry();
    FilterConfig filters;
    int epochs = 300;
    int batch_size = 64;
    float learning_rate = 1e-3f;
    int base_channels = 32;
    int patience = 0;
    std::string out_dir = "out";

    TrainConfig train_config() const;
    NetworkConfig network_config(bool use_skip) const;
};

// Flat `key = value` config with dotted keys; '#' starts a comment. Unknown
// keys and method names are rejected. Values overlay `base`, so precedence
// is defaults < preset < config file < command-line flags.
BenchConfig parse_config_text(const std::string& text, BenchConfig base = BenchConfig{});
BenchConfig load_config(const std::string& path, BenchConfig base = BenchConfig{});
void apply_preset(BenchConfig& cfg, const std::string& preset); // "desk" | "paper"

struct ReportBundle {
    std::string results_csv;
    std::string results_md;
    std::string curves_file;
    std::vector<std::string> panel_pngs;
    std::vector<MetricsRow> rows;
};

// prepare: build (or synthesize) the corpus and write the manifest.
std::string cmd_prepare(const BenchConfig& cfg);

// train: both autoencoder variants with the shared seed; writes checkpoints
// and per-variant history CSVs (epoch,train_loss,val_loss).
struct TrainOutputs {
    std::string skip_checkpoint;
    std::string noskip_checkpoint;
    std::string skip_history;
    std::string noskip_history;
};
TrainOutputs cmd_train(const BenchConfig& cfg);

// bench: inject noise per (test image, variance), run every configured
// method, aggregate per (method, variance), and emit the report bundle.
ReportBundle cmd_bench(const BenchConfig& cfg);

// panel: horizontal strip [clean | noisy | one tile per method] with
// 1-pixel separators for one manifest image at one grid variance.
std::string cmd_panel(const BenchConfig& cfg, const std::string& image_id, double variance);

// curves: per-method (variance, ssim) series from an existing results CSV.
std::string cmd_curves(const BenchConfig& cfg, const std::string& results_csv);

// CSV helpers shared by cmd_bench/cmd_curves and the test suites.
std::string results_csv_header();
std::string format_results_row(const MetricsRow& row);
std::vector<MetricsRow> parse_results_csv(const std::string& path);

} // namespace sbench
