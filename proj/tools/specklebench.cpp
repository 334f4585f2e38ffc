#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "sbench/bench.hpp"

using namespace sbench;

int main(int argc, char** argv) {
    CLI::App app{"Speckle-noise denoising benchmark: classical filters vs "
                 "convolutional denoising autoencoders"};
    app.fallthrough(true);
    app.require_subcommand(1);

    std::string config_path, preset, out_dir;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "key = value config file");
    auto* seed_opt = app.add_option("--seed", seed, "run seed (overrides config)");
    app.add_option("--preset", preset, "parameter preset")
        ->check(CLI::IsMember({"desk", "paper"}));
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides config)");

    auto* cmd_prepare_ = app.add_subcommand("prepare", "build the corpus and write the manifest");
    auto* cmd_train_ = app.add_subcommand("train", "train both autoencoder variants");
    auto* cmd_bench_ = app.add_subcommand("bench", "run the noise/method grid and emit reports");

    auto* cmd_panel_ = app.add_subcommand("panel", "render a clean|noisy|methods comparison strip");
    std::string image_id;
    double variance = 0.7;
    cmd_panel_->add_option("--image", image_id, "image id (manifest path or file stem)")->required();
    cmd_panel_->add_option("--variance", variance, "noise variance (must be on the grid)")
        ->required();

    auto* cmd_curves_ = app.add_subcommand("curves", "emit SSIM-vs-variance series from a results CSV");
    std::string results_path;
    cmd_curves_->add_option("--results", results_path, "results CSV (default <out>/results.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        BenchConfig cfg;
        if (!preset.empty()) apply_preset(cfg, preset);
        if (!config_path.empty()) cfg = load_config(config_path, std::move(cfg));
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (out_opt->count() > 0) cfg.out_dir = out_dir;

        if (cmd_prepare_->parsed()) {
            std::cout << "manifest: " << cmd_prepare(cfg) << "\n";
        } else if (cmd_train_->parsed()) {
            const TrainOutputs outs = cmd_train(cfg);
            std::cout << "checkpoint: " << outs.noskip_checkpoint << "\n"
                      << "checkpoint: " << outs.skip_checkpoint << "\n"
                      << "history: " << outs.noskip_history << "\n"
                      << "history: " << outs.skip_history << "\n";
        } else if (cmd_bench_->parsed()) {
            const ReportBundle bundle = cmd_bench(cfg);
            std::cout << "results: " << bundle.results_csv << "\n"
                      << "report: " << bundle.results_md << "\n"
                      << "curves: " << bundle.curves_file << "\n";
            for (const auto& p : bundle.panel_pngs) std::cout << "panel: " << p << "\n";
        } else if (cmd_panel_->parsed()) {
            std::cout << "panel: " << cmd_panel(cfg, image_id, variance) << "\n";
        } else if (cmd_curves_->parsed()) {
            std::string csv = results_path;
            if (csv.empty())
                csv = (std::filesystem::path(cfg.out_dir) / "results.csv").string();
            std::cout << "curves: " << cmd_curves(cfg, csv) << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainDivergence& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ImageError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
