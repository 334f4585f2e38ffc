#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sbench {

// Thrown when tensor dimensions do not line up; the message names the
// offending dimensions.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

std::string shape_str(const std::vector<int>& shape);

// Dense row-major N-d array of 32-bit floats. Values are stored at 32-bit
// precision; ops may accumulate in wider registers internally.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, float fill = 0.0f);
    static Tensor from(std::vector<int> s, std::vector<float> values);

    int size() const { return static_cast<int>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // 4-d accessors for [N,C,H,W] layouts.
    float& at4(int n, int c, int h, int w);
    float at4(int n, int c, int h, int w) const;

    void fill(float v);
    bool all_finite() const;
};

// Trainable parameter: value plus a same-shaped gradient accumulator.
struct GradTensor {
    Tensor value;
    Tensor grad;

    GradTensor() = default;
    explicit GradTensor(Tensor v) : value(std::move(v)), grad(value.shape, 0.0f) {}
    void zero_grad() { grad.fill(0.0f); }
};

// Weights for conv2d / transposed_conv2d.
//
// conv2d reads weights as [out_ch, in_ch, kh, kw] and bias as [out_ch].
// transposed_conv2d reads the same buffer as [in_ch, out_ch, kh, kw] with
// bias sized to dim 1, so a transposed conv is exactly the adjoint of the
// conv that shares its weights.
struct ConvParams {
    Tensor weights;
    Tensor bias;
    int stride = 1;
    int padding = 0;
};

// Adam moment estimates for one parameter tensor.
struct AdamState {
    Tensor first_moment;
    Tensor second_moment;
    long step_count = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;

    AdamState() = default;
    explicit AdamState(const std::vector<int>& shape)
        : first_moment(shape, 0.0f), second_moment(shape, 0.0f) {}
};

struct ConvGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

struct PoolResult {
    Tensor output;
    std::vector<std::int32_t> argmax; // flat index into the input, one per output value
};

struct LossResult {
    double value = 0.0;
    Tensor grad;
};

// 2-d convolution in the cross-correlation convention (no kernel flip),
// input [N,C,H,W], output [N,F,H',W'] with H' = (H + 2*padding - kh)/stride + 1.
Tensor conv2d(const Tensor& input, const ConvParams& params);
ConvGrads conv2d_backward(const Tensor& input, const ConvParams& params,
                          const Tensor& upstream);

// Adjoint of conv2d: with weights [in_ch, out_ch, kh, kw] and stride s the
// output spatial size is (H-1)*s + kh. Stride 2 / kernel 2 doubles H and W.
Tensor transposed_conv2d(const Tensor& input, const ConvParams& params);
ConvGrads transposed_conv2d_backward(const Tensor& input, const ConvParams& params,
                                     const Tensor& upstream);

// Disjoint 2x2 max pooling; spatial dims must be even. Ties resolve to the
// first (row-major) position so gradients are reproducible.
PoolResult maxpool2x2(const Tensor& input);
Tensor maxpool2x2_backward(const std::vector<int>& input_shape, const PoolResult& pooled,
                           const Tensor& upstream);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

Tensor sigmoid(const Tensor& input);
// Takes the forward *output* (derivative is s*(1-s)).
Tensor sigmoid_backward(const Tensor& output, const Tensor& upstream);

// Channels of a precede channels of b; N,H,W must match.
Tensor concat_channels(const Tensor& a, const Tensor& b);
// Backward of concat: splits along channels after the first `ca` channels.
std::pair<Tensor, Tensor> split_channels(const Tensor& x, int ca);

// Mean squared error and its gradient w.r.t. pred: 2*(pred-target)/count.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

// Standard Adam update with bias correction; increments state.step_count.
// Zero gradients leave the parameter unchanged.
void adam_step(GradTensor& param, AdamState& state, float lr);
void adam_step_inplace(Tensor& value, const Tensor& grad, AdamState& state, float lr);

// Number of worker threads used by the conv kernels (SBENCH_THREADS
// overrides hardware_concurrency). Parallel splits are per output element,
// so results are identical to the sequential path.
int thread_count();

} // namespace sbench
