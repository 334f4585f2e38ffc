#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbench/image.hpp"
#include "sbench/noise.hpp"
#include "sbench/tensor.hpp"

namespace sbench {

enum class LayerKind {
    conv3x3,            // 3x3 conv, padding 1, followed by ReLU
    maxpool2x2,         // the single downsampling stage
    transposed_conv2x2, // stride-2 upsampling, linear
    concat_skip,        // channel-concat with a tagged encoder output
    conv3x3_sigmoid,    // 3x3 conv, padding 1, sigmoid head
};

struct LayerSpec {
    LayerKind kind;
    int in_ch = 0;
    int out_ch = 0;
    std::string tag;         // set on encoder rows that feed a skip
    std::string skip_source; // on concat_skip rows: the tag to pull in
};

// Autoencoder topology. Both variants map [N,1,S,S] -> [N,1,S,S]; the skip
// variant re-injects the pre-pool encoder features into the decoder by
// concatenation.
struct NetworkConfig {
    bool use_skip = true;
    int base_channels = 32;
    int input_size = 128;
};

// The concrete layer table: encoder conv(1->C), conv(C->C) [tag enc1],
// maxpool, conv(C->2C), conv(2C->2C); decoder tconv(2C->C),
// [skip: concat enc1 -> 2C], conv(->C), conv_sigmoid(C->1).
std::vector<LayerSpec> layer_table(const NetworkConfig& cfg);

struct TrainConfig {
    int epochs = 300;
    int batch_size = 64;
    float learning_rate = 1e-3f;
    std::vector<double> noise_variances = canonical_variances();
    std::uint64_t seed = 0;
    int patience = 0; // 0 disables early stopping
};

struct Checkpoint {
    std::uint32_t version = 1;
    NetworkConfig config;
    std::uint64_t seed = 0;
    int epoch = 0; // epoch with the best validation loss (1-based)
    double best_val_loss = 0.0;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Training aborted on a non-finite loss; carries the last epoch that was
// still finite (0 if the very first epoch diverged).
struct TrainDivergence : std::runtime_error {
    int last_finite_epoch;
    TrainDivergence(const std::string& msg, int epoch)
        : std::runtime_error(msg), last_finite_epoch(epoch) {}
};

// Parameters plus optimizer state for one trainable table row.
struct LayerState {
    ConvParams params;
    Tensor grad_weights;
    Tensor grad_bias;
    AdamState opt_weights;
    AdamState opt_bias;
};

class Network {
public:
    // He-uniform init (fan-in scaled), deterministic in the seed.
    Network(const NetworkConfig& cfg, std::uint64_t seed);

    const NetworkConfig& config() const { return cfg_; }
    const std::vector<LayerSpec>& table() const { return table_; }
    std::vector<LayerState>& states() { return states_; }
    const std::vector<LayerState>& states() const { return states_; }

    Tensor forward(const Tensor& batch) const;

    // One optimizer step on a (noisy, clean) batch; returns the batch loss.
    double train_step(const Tensor& noisy, const Tensor& clean, float lr);

    // L2 norm of the most recent weight gradient at the first conv layer.
    double first_layer_grad_l2() const;

    Checkpoint to_checkpoint(int epoch, double best_val_loss, std::uint64_t seed) const;
    static Network from_checkpoint(const Checkpoint& c);

private:
    NetworkConfig cfg_;
    std::vector<LayerSpec> table_;
    std::vector<LayerState> states_;
    std::vector<int> state_index_; // table row -> states_ index, -1 for rows without params
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
};

struct TrainResult {
    Checkpoint best;
    TrainHistory history;
};

// Core loop over pre-sized images (input_size x input_size). Per epoch each
// training image is paired with a fresh noisy copy at a variance drawn
// deterministically from cfg.noise_variances; validation pairs keep fixed
// variances (cycled) and fixed noise so the monitored loss is comparable
// across epochs. The checkpoint with the best validation loss is returned.
TrainResult train_on_images(Network& net, const std::vector<GrayImage>& train_images,
                            const std::vector<GrayImage>& val_images, const TrainConfig& cfg);

// Manifest-level entry point: loads the train/val splits, resizes to the
// network input, and calls train_on_images.
TrainResult train(Network& net, const DatasetManifest& manifest, const TrainConfig& cfg);

// Forward pass on one image (must already be input_size x input_size),
// clamped to [0,1].
GrayImage denoise(const Network& net, const GrayImage& img);
GrayImage denoise(const Checkpoint& checkpoint, const GrayImage& img);

} // namespace sbench
