#include "sbench/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

namespace sbench {

namespace {

long long shape_product(const std::vector<int>& s) {
    long long p = 1;
    for (int d : s) p *= d;
    return p;
}

// Splits [0,n) into contiguous chunks, one per worker. Each index is handled
// by exactly one thread, so results match the sequential path bit for bit.
void parallel_for(int n, const std::function<void(int, int)>& body) {
    const int workers = std::min(thread_count(), n);
    if (workers <= 1 || n <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    const int chunk = (n + workers - 1) / workers;
    for (int t = 1; t < workers; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(body, lo, hi);
    }
    body(0, std::min(n, chunk));
    for (auto& th : pool) th.join();
}

void check_4d(const Tensor& t, const char* what) {
    if (t.shape.size() != 4)
        throw ShapeError(std::string(what) + ": expected 4-d [N,C,H,W], got " + shape_str(t.shape));
}

} // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<int> s, float fill) : shape(std::move(s)) {
    for (int d : shape)
        if (d < 0) throw ShapeError("Tensor: negative dimension in " + shape_str(shape));
    data.assign(static_cast<std::size_t>(shape_product(shape)), fill);
}

Tensor Tensor::from(std::vector<int> s, std::vector<float> values) {
    Tensor t;
    t.shape = std::move(s);
    if (shape_product(t.shape) != static_cast<long long>(values.size()))
        throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_str(t.shape));
    t.data = std::move(values);
    return t;
}

float& Tensor::at4(int n, int c, int h, int w) {
    return data[static_cast<std::size_t>(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
}

float Tensor::at4(int n, int c, int h, int w) const {
    return data[static_cast<std::size_t>(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
}

void Tensor::fill(float v) { std::fill(data.begin(), data.end(), v); }

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

int thread_count() {
    static const int n = [] {
        if (const char* env = std::getenv("SBENCH_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw ? static_cast<int>(hw) : 1;
    }();
    return n;
}

Tensor conv2d(const Tensor& input, const ConvParams& params) {
    check_4d(input, "conv2d input");
    check_4d(params.weights, "conv2d weights");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int F = params.weights.dim(0), WC = params.weights.dim(1);
    const int KH = params.weights.dim(2), KW = params.weights.dim(3);
    if (C != WC)
        throw ShapeError("conv2d: input channels C=" + std::to_string(C) +
                         " != weight in_ch=" + std::to_string(WC) +
                         " (weights " + shape_str(params.weights.shape) + ")");
    if (params.bias.shape != std::vector<int>{F})
        throw ShapeError("conv2d: bias " + shape_str(params.bias.shape) +
                         " != [out_ch]=[" + std::to_string(F) + "]");
    const int s = params.stride, p = params.padding;
    if (s <= 0 || p < 0)
        throw ShapeError("conv2d: stride=" + std::to_string(s) + " padding=" + std::to_string(p));
    if (H + 2 * p < KH || W + 2 * p < KW)
        throw ShapeError("conv2d: spatial " + std::to_string(H) + "x" + std::to_string(W) +
                         " smaller than kernel " + std::to_string(KH) + "x" + std::to_string(KW) +
                         " after padding " + std::to_string(p));

    const int HO = (H + 2 * p - KH) / s + 1;
    const int WO = (W + 2 * p - KW) / s + 1;
    Tensor out({N, F, HO, WO});

    const float* in = input.data.data();
    const float* wt = params.weights.data.data();
    float* o = out.data.data();

    parallel_for(N * F, [&](int lo, int hi) {
        for (int nf = lo; nf < hi; ++nf) {
            const int n = nf / F, f = nf % F;
            float* oplane = o + static_cast<std::size_t>(nf) * HO * WO;
            const float bias = params.bias.data[static_cast<std::size_t>(f)];
            for (int ho = 0; ho < HO; ++ho) {
                float* orow = oplane + static_cast<std::size_t>(ho) * WO;
                std::fill(orow, orow + WO, bias);
                for (int ci = 0; ci < C; ++ci) {
                    const float* iplane = in + (static_cast<std::size_t>(n) * C + ci) * H * W;
                    const float* wker = wt + (static_cast<std::size_t>(f) * C + ci) * KH * KW;
                    for (int kh = 0; kh < KH; ++kh) {
                        const int hi_ = ho * s + kh - p;
                        if (hi_ < 0 || hi_ >= H) continue;
                        const float* irow = iplane + static_cast<std::size_t>(hi_) * W;
                        for (int kw = 0; kw < KW; ++kw) {
                            const float wv = wker[kh * KW + kw];
                            // valid wo range: 0 <= wo*s + kw - p < W
                            int wo_lo = 0;
                            if (kw - p < 0) wo_lo = (p - kw + s - 1) / s;
                            int wo_hi = WO;
                            const int max_wi = W - 1 - (kw - p);
                            if (max_wi < 0) continue;
                            wo_hi = std::min(WO, max_wi / s + 1);
                            const float* ir = irow + (kw - p);
                            if (s == 1) {
                                for (int wo = wo_lo; wo < wo_hi; ++wo) orow[wo] += wv * ir[wo];
                            } else {
                                for (int wo = wo_lo; wo < wo_hi; ++wo) orow[wo] += wv * ir[wo * s];
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvParams& params, const Tensor& upstream) {
    check_4d(input, "conv2d_backward input");
    check_4d(upstream, "conv2d_backward upstream");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int F = params.weights.dim(0);
    const int KH = params.weights.dim(2), KW = params.weights.dim(3);
    const int s = params.stride, p = params.padding;
    const int HO = (H + 2 * p - KH) / s + 1;
    const int WO = (W + 2 * p - KW) / s + 1;
    if (upstream.shape != std::vector<int>{N, F, HO, WO})
        throw ShapeError("conv2d_backward: upstream " + shape_str(upstream.shape) +
                         " != forward output " + shape_str({N, F, HO, WO}));

    ConvGrads g;
    g.input = Tensor(input.shape);
    g.weights = Tensor(params.weights.shape);
    g.bias = Tensor(params.bias.shape);

    const float* in = input.data.data();
    const float* wt = params.weights.data.data();
    const float* up = upstream.data.data();

    // grad_input: scatter, disjoint per batch element.
    parallel_for(N, [&](int lo, int hi) {
        for (int n = lo; n < hi; ++n) {
            float* gin = g.input.data.data() + static_cast<std::size_t>(n) * C * H * W;
            for (int f = 0; f < F; ++f) {
                const float* uplane = up + (static_cast<std::size_t>(n) * F + f) * HO * WO;
                for (int ho = 0; ho < HO; ++ho) {
                    for (int wo = 0; wo < WO; ++wo) {
                        const float u = uplane[ho * WO + wo];
                        if (u == 0.0f) continue;
                        for (int ci = 0; ci < C; ++ci) {
                            float* gplane = gin + static_cast<std::size_t>(ci) * H * W;
                            const float* wker = wt + (static_cast<std::size_t>(f) * C + ci) * KH * KW;
                            for (int kh = 0; kh < KH; ++kh) {
                                const int hi_ = ho * s + kh - p;
                                if (hi_ < 0 || hi_ >= H) continue;
                                for (int kw = 0; kw < KW; ++kw) {
                                    const int wi = wo * s + kw - p;
                                    if (wi < 0 || wi >= W) continue;
                                    gplane[hi_ * W + wi] += wker[kh * KW + kw] * u;
                                }
                            }
                        }
                    }
                }
            }
        }
    });

    // grad_weights and grad_bias: disjoint per output channel.
    parallel_for(F, [&](int lo, int hi) {
        for (int f = lo; f < hi; ++f) {
            double bias_acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* uplane = up + (static_cast<std::size_t>(n) * F + f) * HO * WO;
                for (int i = 0; i < HO * WO; ++i) bias_acc += uplane[i];
            }
            g.bias.data[static_cast<std::size_t>(f)] = static_cast<float>(bias_acc);

            for (int ci = 0; ci < C; ++ci) {
                float* gw = g.weights.data.data() + (static_cast<std::size_t>(f) * C + ci) * KH * KW;
                for (int kh = 0; kh < KH; ++kh) {
                    for (int kw = 0; kw < KW; ++kw) {
                        double acc = 0.0;
                        for (int n = 0; n < N; ++n) {
                            const float* iplane = in + (static_cast<std::size_t>(n) * C + ci) * H * W;
                            const float* uplane = up + (static_cast<std::size_t>(n) * F + f) * HO * WO;
                            for (int ho = 0; ho < HO; ++ho) {
                                const int hi_ = ho * s + kh - p;
                                if (hi_ < 0 || hi_ >= H) continue;
                                const float* irow = iplane + static_cast<std::size_t>(hi_) * W;
                                const float* urow = uplane + static_cast<std::size_t>(ho) * WO;
                                for (int wo = 0; wo < WO; ++wo) {
                                    const int wi = wo * s + kw - p;
                                    if (wi < 0 || wi >= W) continue;
                                    acc += static_cast<double>(irow[wi]) * urow[wo];
                                }
                            }
                        }
                        gw[kh * KW + kw] = static_cast<float>(acc);
                    }
                }
            }
        }
    });
    return g;
}

Tensor transposed_conv2d(const Tensor& input, const ConvParams& params) {
    check_4d(input, "transposed_conv2d input");
    check_4d(params.weights, "transposed_conv2d weights");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int WC = params.weights.dim(0), F = params.weights.dim(1);
    const int KH = params.weights.dim(2), KW = params.weights.dim(3);
    if (C != WC)
        throw ShapeError("transposed_conv2d: input channels C=" + std::to_string(C) +
                         " != weight in_ch=" + std::to_string(WC) +
                         " (weights read as [in_ch,out_ch,kh,kw] " + shape_str(params.weights.shape) + ")");
    if (params.bias.shape != std::vector<int>{F})
        throw ShapeError("transposed_conv2d: bias " + shape_str(params.bias.shape) +
                         " != [out_ch]=[" + std::to_string(F) + "]");
    const int s = params.stride;
    if (s <= 0 || params.padding != 0)
        throw ShapeError("transposed_conv2d: stride=" + std::to_string(s) +
                         " padding=" + std::to_string(params.padding) + " (padding unsupported)");

    const int HO = (H - 1) * s + KH;
    const int WO = (W - 1) * s + KW;
    Tensor out({N, F, HO, WO});

    const float* in = input.data.data();
    const float* wt = params.weights.data.data();

    parallel_for(N * F, [&](int lo, int hi) {
        for (int nf = lo; nf < hi; ++nf) {
            const int n = nf / F, f = nf % F;
            float* oplane = out.data.data() + static_cast<std::size_t>(nf) * HO * WO;
            std::fill(oplane, oplane + HO * WO, params.bias.data[static_cast<std::size_t>(f)]);
            for (int ci = 0; ci < C; ++ci) {
                const float* iplane = in + (static_cast<std::size_t>(n) * C + ci) * H * W;
                const float* wker = wt + (static_cast<std::size_t>(ci) * F + f) * KH * KW;
                for (int h = 0; h < H; ++h) {
                    const float* irow = iplane + static_cast<std::size_t>(h) * W;
                    for (int kh = 0; kh < KH; ++kh) {
                        float* orow = oplane + static_cast<std::size_t>(h * s + kh) * WO;
                        for (int kw = 0; kw < KW; ++kw) {
                            const float wv = wker[kh * KW + kw];
                            for (int w = 0; w < W; ++w) orow[w * s + kw] += wv * irow[w];
                        }
                    }
                }
            }
        }
    });
    return out;
}

ConvGrads transposed_conv2d_backward(const Tensor& input, const ConvParams& params,
                                     const Tensor& upstream) {
    check_4d(input, "transposed_conv2d_backward input");
    check_4d(upstream, "transposed_conv2d_backward upstream");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int F = params.weights.dim(1);
    const int KH = params.weights.dim(2), KW = params.weights.dim(3);
    const int s = params.stride;
    const int HO = (H - 1) * s + KH;
    const int WO = (W - 1) * s + KW;
    if (upstream.shape != std::vector<int>{N, F, HO, WO})
        throw ShapeError("transposed_conv2d_backward: upstream " + shape_str(upstream.shape) +
                         " != forward output " + shape_str({N, F, HO, WO}));

    ConvGrads g;
    g.input = Tensor(input.shape);
    g.weights = Tensor(params.weights.shape);
    g.bias = Tensor(params.bias.shape);

    const float* in = input.data.data();
    const float* wt = params.weights.data.data();
    const float* up = upstream.data.data();

    // grad_input: gather (forward conv of the upstream with shared weights).
    parallel_for(N * C, [&](int lo, int hi) {
        for (int nc = lo; nc < hi; ++nc) {
            const int n = nc / C, ci = nc % C;
            float* gplane = g.input.data.data() + static_cast<std::size_t>(nc) * H * W;
            for (int h = 0; h < H; ++h) {
                for (int w = 0; w < W; ++w) {
                    float acc = 0.0f;
                    for (int f = 0; f < F; ++f) {
                        const float* uplane = up + (static_cast<std::size_t>(n) * F + f) * HO * WO;
                        const float* wker = wt + (static_cast<std::size_t>(ci) * F + f) * KH * KW;
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw)
                                acc += wker[kh * KW + kw] * uplane[(h * s + kh) * WO + (w * s + kw)];
                    }
                    gplane[h * W + w] = acc;
                }
            }
        }
    });

    // grad_weights: disjoint per input channel.
    parallel_for(C, [&](int lo, int hi) {
        for (int ci = lo; ci < hi; ++ci) {
            for (int f = 0; f < F; ++f) {
                float* gw = g.weights.data.data() + (static_cast<std::size_t>(ci) * F + f) * KH * KW;
                for (int kh = 0; kh < KH; ++kh) {
                    for (int kw = 0; kw < KW; ++kw) {
                        double acc = 0.0;
                        for (int n = 0; n < N; ++n) {
                            const float* iplane = in + (static_cast<std::size_t>(n) * C + ci) * H * W;
                            const float* uplane = up + (static_cast<std::size_t>(n) * F + f) * HO * WO;
                            for (int h = 0; h < H; ++h) {
                                const float* irow = iplane + static_cast<std::size_t>(h) * W;
                                const float* urow = uplane + static_cast<std::size_t>(h * s + kh) * WO + kw;
                                for (int w = 0; w < W; ++w) acc += static_cast<double>(irow[w]) * urow[w * s];
                            }
                        }
                        gw[kh * KW + kw] = static_cast<float>(acc);
                    }
                }
            }
        }
    });

    for (int f = 0; f < F; ++f) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* uplane = up + (static_cast<std::size_t>(n) * F + f) * HO * WO;
            for (int i = 0; i < HO * WO; ++i) acc += uplane[i];
        }
        g.bias.data[static_cast<std::size_t>(f)] = static_cast<float>(acc);
    }
    return g;
}

PoolResult maxpool2x2(const Tensor& input) {
    check_4d(input, "maxpool2x2 input");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (H % 2 != 0 || W % 2 != 0)
        throw ShapeError("maxpool2x2: spatial dims must be even, got " +
                         std::to_string(H) + "x" + std::to_string(W));

    PoolResult r;
    r.output = Tensor({N, C, H / 2, W / 2});
    r.argmax.resize(r.output.data.size());

    const float* in = input.data.data();
    std::size_t oi = 0;
    for (int nc = 0; nc < N * C; ++nc) {
        const float* plane = in + static_cast<std::size_t>(nc) * H * W;
        const std::size_t base = static_cast<std::size_t>(nc) * H * W;
        for (int h = 0; h < H; h += 2) {
            for (int w = 0; w < W; w += 2) {
                int best = h * W + w;
                float best_v = plane[best];
                const int cand[3] = {h * W + w + 1, (h + 1) * W + w, (h + 1) * W + w + 1};
                for (int c : cand) {
                    if (plane[c] > best_v) {
                        best_v = plane[c];
                        best = c;
                    }
                }
                r.output.data[oi] = best_v;
                r.argmax[oi] = static_cast<std::int32_t>(base + static_cast<std::size_t>(best));
                ++oi;
            }
        }
    }
    return r;
}

Tensor maxpool2x2_backward(const std::vector<int>& input_shape, const PoolResult& pooled,
                           const Tensor& upstream) {
    if (upstream.shape != pooled.output.shape)
        throw ShapeError("maxpool2x2_backward: upstream " + shape_str(upstream.shape) +
                         " != pooled output " + shape_str(pooled.output.shape));
    Tensor g(input_shape);
    for (std::size_t i = 0; i < pooled.argmax.size(); ++i)
        g.data[static_cast<std::size_t>(pooled.argmax[i])] += upstream.data[i];
    return g;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
    if (!input.same_shape(upstream))
        throw ShapeError("relu_backward: input " + shape_str(input.shape) +
                         " != upstream " + shape_str(upstream.shape));
    Tensor g = upstream;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (input.data[i] <= 0.0f) g.data[i] = 0.0f;
    return g;
}

Tensor sigmoid(const Tensor& input) {
    // Clamped to the nearest representable values inside (0,1): the exact
    // logistic never reaches the endpoints, but float rounding does.
    static const float lo = std::nextafter(0.0f, 1.0f);
    static const float hi = std::nextafter(1.0f, 0.0f);
    Tensor out = input;
    for (float& v : out.data) v = std::clamp(1.0f / (1.0f + std::exp(-v)), lo, hi);
    return out;
}

Tensor sigmoid_backward(const Tensor& output, const Tensor& upstream) {
    if (!output.same_shape(upstream))
        throw ShapeError("sigmoid_backward: output " + shape_str(output.shape) +
                         " != upstream " + shape_str(upstream.shape));
    Tensor g = upstream;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        const float s = output.data[i];
        g.data[i] *= s * (1.0f - s);
    }
    return g;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    check_4d(a, "concat_channels a");
    check_4d(b, "concat_channels b");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: a " + shape_str(a.shape) + " and b " +
                         shape_str(b.shape) + " differ outside the channel dim");
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    Tensor out({N, Ca + Cb, H, W});
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        float* dst = out.data.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane;
        const float* pa = a.data.data() + static_cast<std::size_t>(n) * Ca * plane;
        const float* pb = b.data.data() + static_cast<std::size_t>(n) * Cb * plane;
        std::copy(pa, pa + Ca * plane, dst);
        std::copy(pb, pb + Cb * plane, dst + Ca * plane);
    }
    return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& x, int ca) {
    check_4d(x, "split_channels x");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (ca < 0 || ca > C)
        throw ShapeError("split_channels: ca=" + std::to_string(ca) + " out of [0," +
                         std::to_string(C) + "]");
    const int cb = C - ca;
    Tensor a({N, ca, H, W}), b({N, cb, H, W});
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        const float* src = x.data.data() + static_cast<std::size_t>(n) * C * plane;
        std::copy(src, src + ca * plane, a.data.data() + static_cast<std::size_t>(n) * ca * plane);
        std::copy(src + ca * plane, src + C * plane,
                  b.data.data() + static_cast<std::size_t>(n) * cb * plane);
    }
    return {std::move(a), std::move(b)};
}

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw ShapeError("mse_loss: pred " + shape_str(pred.shape) + " != target " +
                         shape_str(target.shape));
    LossResult r;
    r.grad = Tensor(pred.shape);
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - target.data[i];
        acc += d * d;
        r.grad.data[i] = static_cast<float>(2.0 * d * inv_n);
    }
    r.value = acc * inv_n;
    return r;
}

void adam_step_inplace(Tensor& value, const Tensor& grad, AdamState& state, float lr) {
    if (!state.first_moment.same_shape(value))
        throw ShapeError("adam_step: moments " + shape_str(state.first_moment.shape) +
                         " != param " + shape_str(value.shape));
    if (!grad.same_shape(value))
        throw ShapeError("adam_step: grad " + shape_str(grad.shape) + " != param " +
                         shape_str(value.shape));
    state.step_count += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < value.data.size(); ++i) {
        const double g = grad.data[i];
        const double m = b1 * state.first_moment.data[i] + (1.0 - b1) * g;
        const double v = b2 * state.second_moment.data[i] + (1.0 - b2) * g * g;
        state.first_moment.data[i] = static_cast<float>(m);
        state.second_moment.data[i] = static_cast<float>(v);
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        value.data[i] = static_cast<float>(
            value.data[i] - static_cast<double>(lr) * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
}

void adam_step(GradTensor& param, AdamState& state, float lr) {
    adam_step_inplace(param.value, param.grad, state, lr);
}

} // namespace sbench
