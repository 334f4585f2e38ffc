#include "sbench/net.hpp"
#include "sbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace sbench {

namespace {

// Sub-seed tags so every random stream (init, shuffle, noise pairing) is
// independent of the others.
constexpr std::uint64_t kTagInit = 1;
constexpr std::uint64_t kTagShuffle = 2;
constexpr std::uint64_t kTagTrainVariance = 3;
constexpr std::uint64_t kTagTrainNoise = 4;
constexpr std::uint64_t kTagValNoise = 5;

bool has_params(LayerKind k) {
    return k == LayerKind::conv3x3 || k == LayerKind::conv3x3_sigmoid ||
           k == LayerKind::transposed_conv2x2;
}

// What the backward pass needs per table row.
struct RowTrace {
    Tensor input;            // conv/tconv input
    Tensor pre;              // conv pre-activation; sigmoid row stores the output
    PoolResult pool;         // maxpool rows
    std::vector<int> in_shape;
    int concat_ca = 0;
};

void add_inplace(Tensor& dst, const Tensor& src) {
    if (!dst.same_shape(src))
        throw ShapeError("gradient merge: " + shape_str(dst.shape) + " vs " + shape_str(src.shape));
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(os, u);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    put_u64(os, u);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
    const std::uint64_t lo = get_u32(is);
    const std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

float get_f32(std::istream& is) {
    const std::uint32_t u = get_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

double get_f64(std::istream& is) {
    const std::uint64_t u = get_u64(is);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

Tensor image_to_tensor(const GrayImage& img) {
    Tensor t({1, 1, img.height, img.width});
    std::copy(img.pixels.begin(), img.pixels.end(), t.data.begin());
    return t;
}

} // namespace

std::vector<LayerSpec> layer_table(const NetworkConfig& cfg) {
    const int c = cfg.base_channels;
    std::vector<LayerSpec> t;
    t.push_back({LayerKind::conv3x3, 1, c, "", ""});
    t.push_back({LayerKind::conv3x3, c, c, "enc1", ""});
    t.push_back({LayerKind::maxpool2x2, c, c, "", ""});
    t.push_back({LayerKind::conv3x3, c, 2 * c, "", ""});
    t.push_back({LayerKind::conv3x3, 2 * c, 2 * c, "", ""});
    t.push_back({LayerKind::transposed_conv2x2, 2 * c, c, "", ""});
    if (cfg.use_skip) t.push_back({LayerKind::concat_skip, c, 2 * c, "", "enc1"});
    t.push_back({LayerKind::conv3x3, cfg.use_skip ? 2 * c : c, c, "", ""});
    t.push_back({LayerKind::conv3x3_sigmoid, c, 1, "", ""});
    return t;
}

Network::Network(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.base_channels < 1)
        throw std::invalid_argument("Network: base_channels must be >= 1");
    if (cfg.input_size < 2 || cfg.input_size % 2 != 0)
        throw std::invalid_argument("Network: input_size must be even and >= 2");
    table_ = layer_table(cfg);

    // Validate channel arithmetic and the single-pool/skip-only constraints.
    std::map<std::string, int> tag_channels;
    int cur = 1;
    int pools = 0;
    for (const auto& row : table_) {
        if (row.in_ch != cur)
            throw std::invalid_argument("Network: layer expects " + std::to_string(row.in_ch) +
                                        " channels but receives " + std::to_string(cur));
        switch (row.kind) {
            case LayerKind::maxpool2x2:
                ++pools;
                break;
            case LayerKind::concat_skip: {
                if (!cfg.use_skip)
                    throw std::invalid_argument("Network: concat_skip in a no-skip config");
                auto it = tag_channels.find(row.skip_source);
                if (it == tag_channels.end())
                    throw std::invalid_argument("Network: unknown skip source '" + row.skip_source + "'");
                if (row.in_ch + it->second != row.out_ch)
                    throw std::invalid_argument("Network: concat channel arithmetic " +
                                                std::to_string(row.in_ch) + "+" +
                                                std::to_string(it->second) +
                                                " != " + std::to_string(row.out_ch));
                break;
            }
            default:
                break;
        }
        cur = row.out_ch;
        if (!row.tag.empty()) tag_channels[row.tag] = row.out_ch;
    }
    if (pools != 1) throw std::invalid_argument("Network: expected exactly one maxpool2x2");
    if (cur != 1) throw std::invalid_argument("Network: output channels != 1");

    state_index_.assign(table_.size(), -1);
    for (std::size_t i = 0; i < table_.size(); ++i) {
        const auto& row = table_[i];
        if (!has_params(row.kind)) continue;

        LayerState st;
        if (row.kind == LayerKind::transposed_conv2x2) {
            st.params.weights = Tensor({row.in_ch, row.out_ch, 2, 2});
            st.params.stride = 2;
            st.params.padding = 0;
        } else {
            st.params.weights = Tensor({row.out_ch, row.in_ch, 3, 3});
            st.params.stride = 1;
            st.params.padding = 1;
        }
        st.params.bias = Tensor({row.out_ch});

        const int kh = st.params.weights.dim(2);
        const float limit = std::sqrt(6.0f / static_cast<float>(row.in_ch * kh * kh));
        Rng rng(mix_seed(seed, kTagInit, static_cast<std::uint64_t>(i)));
        for (float& w : st.params.weights.data)
            w = static_cast<float>(rng.next_uniform(-limit, limit));

        st.grad_weights = Tensor(st.params.weights.shape);
        st.grad_bias = Tensor(st.params.bias.shape);
        st.opt_weights = AdamState(st.params.weights.shape);
        st.opt_bias = AdamState(st.params.bias.shape);

        state_index_[i] = static_cast<int>(states_.size());
        states_.push_back(std::move(st));
    }
}

namespace {

Tensor run_table(const std::vector<LayerSpec>& table, const std::vector<LayerState>& states,
                 const std::vector<int>& state_index, const NetworkConfig& cfg,
                 const Tensor& batch, std::vector<RowTrace>* trace) {
    if (batch.shape.size() != 4 || batch.dim(1) != 1 || batch.dim(2) != cfg.input_size ||
        batch.dim(3) != cfg.input_size)
        throw ShapeError("Network::forward: batch " + shape_str(batch.shape) + " != [N,1," +
                         std::to_string(cfg.input_size) + "," + std::to_string(cfg.input_size) + "]");

    Tensor cur = batch;
    std::map<std::string, Tensor> stash;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& row = table[i];
        RowTrace* tr = trace ? &(*trace)[i] : nullptr;
        switch (row.kind) {
            case LayerKind::conv3x3: {
                const auto& st = states[static_cast<std::size_t>(state_index[i])];
                Tensor pre = conv2d(cur, st.params);
                Tensor post = relu(pre);
                if (tr) {
                    tr->input = std::move(cur);
                    tr->pre = std::move(pre);
                }
                cur = std::move(post);
                break;
            }
            case LayerKind::conv3x3_sigmoid: {
                const auto& st = states[static_cast<std::size_t>(state_index[i])];
                Tensor pre = conv2d(cur, st.params);
                Tensor post = sigmoid(pre);
                if (tr) {
                    tr->input = std::move(cur);
                    tr->pre = post; // sigmoid backward works from the output
                }
                cur = std::move(post);
                break;
            }
            case LayerKind::maxpool2x2: {
                PoolResult pr = maxpool2x2(cur);
                if (tr) {
                    tr->in_shape = cur.shape;
                    tr->pool.argmax = pr.argmax;
                    tr->pool.output = pr.output; // shape needed by the backward check
                }
                cur = std::move(pr.output);
                break;
            }
            case LayerKind::transposed_conv2x2: {
                const auto& st = states[static_cast<std::size_t>(state_index[i])];
                Tensor out = transposed_conv2d(cur, st.params);
                if (tr) tr->input = std::move(cur);
                cur = std::move(out);
                break;
            }
            case LayerKind::concat_skip: {
                const Tensor& side = stash.at(row.skip_source);
                if (tr) tr->concat_ca = cur.dim(1);
                cur = concat_channels(cur, side);
                break;
            }
        }
        if (!row.tag.empty()) stash[row.tag] = cur;
    }
    return cur;
}

} // namespace

Tensor Network::forward(const Tensor& batch) const {
    return run_table(table_, states_, state_index_, cfg_, batch, nullptr);
}

double Network::train_step(const Tensor& noisy, const Tensor& clean, float lr) {
    std::vector<RowTrace> trace(table_.size());
    Tensor out = run_table(table_, states_, state_index_, cfg_, noisy, &trace);
    LossResult loss = mse_loss(out, clean);

    Tensor g = std::move(loss.grad);
    std::map<std::string, Tensor> stash_grad;
    for (int i = static_cast<int>(table_.size()) - 1; i >= 0; --i) {
        const auto& row = table_[static_cast<std::size_t>(i)];
        RowTrace& tr = trace[static_cast<std::size_t>(i)];
        if (!row.tag.empty()) {
            auto it = stash_grad.find(row.tag);
            if (it != stash_grad.end()) add_inplace(g, it->second);
        }
        switch (row.kind) {
            case LayerKind::conv3x3: {
                auto& st = states_[static_cast<std::size_t>(state_index_[static_cast<std::size_t>(i)])];
                Tensor gz = relu_backward(tr.pre, g);
                ConvGrads cg = conv2d_backward(tr.input, st.params, gz);
                st.grad_weights = std::move(cg.weights);
                st.grad_bias = std::move(cg.bias);
                g = std::move(cg.input);
                break;
            }
            case LayerKind::conv3x3_sigmoid: {
                auto& st = states_[static_cast<std::size_t>(state_index_[static_cast<std::size_t>(i)])];
                Tensor gz = sigmoid_backward(tr.pre, g);
                ConvGrads cg = conv2d_backward(tr.input, st.params, gz);
                st.grad_weights = std::move(cg.weights);
                st.grad_bias = std::move(cg.bias);
                g = std::move(cg.input);
                break;
            }
            case LayerKind::maxpool2x2: {
                g = maxpool2x2_backward(tr.in_shape, tr.pool, g);
                break;
            }
            case LayerKind::transposed_conv2x2: {
                auto& st = states_[static_cast<std::size_t>(state_index_[static_cast<std::size_t>(i)])];
                ConvGrads cg = transposed_conv2d_backward(tr.input, st.params, g);
                st.grad_weights = std::move(cg.weights);
                st.grad_bias = std::move(cg.bias);
                g = std::move(cg.input);
                break;
            }
            case LayerKind::concat_skip: {
                auto parts = split_channels(g, tr.concat_ca);
                g = std::move(parts.first);
                stash_grad[row.skip_source] = std::move(parts.second);
                break;
            }
        }
    }

    for (auto& st : states_) {
        adam_step_inplace(st.params.weights, st.grad_weights, st.opt_weights, lr);
        adam_step_inplace(st.params.bias, st.grad_bias, st.opt_bias, lr);
    }
    return loss.value;
}

double Network::first_layer_grad_l2() const {
    double acc = 0.0;
    for (float v : states_.front().grad_weights.data) acc += static_cast<double>(v) * v;
    return std::sqrt(acc);
}

Checkpoint Network::to_checkpoint(int epoch, double best_val_loss, std::uint64_t seed) const {
    Checkpoint c;
    c.config = cfg_;
    c.seed = seed;
    c.epoch = epoch;
    c.best_val_loss = best_val_loss;
    for (std::size_t i = 0; i < table_.size(); ++i) {
        if (state_index_[i] < 0) continue;
        const auto& st = states_[static_cast<std::size_t>(state_index_[i])];
        const std::string base = "layer" + std::to_string(i);
        c.tensors.emplace_back(base + ".weights", st.params.weights);
        c.tensors.emplace_back(base + ".bias", st.params.bias);
    }
    return c;
}

Network Network::from_checkpoint(const Checkpoint& c) {
    Network net(c.config, c.seed);
    std::size_t k = 0;
    for (std::size_t i = 0; i < net.table_.size(); ++i) {
        if (net.state_index_[i] < 0) continue;
        auto& st = net.states_[static_cast<std::size_t>(net.state_index_[i])];
        const std::string base = "layer" + std::to_string(i);
        for (const char* part : {".weights", ".bias"}) {
            if (k >= c.tensors.size() || c.tensors[k].first != base + part)
                throw std::runtime_error("from_checkpoint: missing tensor '" + base + part + "'");
            Tensor& dst = std::strcmp(part, ".weights") == 0 ? st.params.weights : st.params.bias;
            if (c.tensors[k].second.shape != dst.shape)
                throw std::runtime_error("from_checkpoint: shape mismatch for '" + base + part +
                                         "': " + shape_str(c.tensors[k].second.shape) + " vs " +
                                         shape_str(dst.shape));
            dst = c.tensors[k].second;
            ++k;
        }
    }
    if (k != c.tensors.size())
        throw std::runtime_error("from_checkpoint: unexpected extra tensors in checkpoint");
    return net;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot write '" + path + "'");
    // Little-endian container; the version field gates any future change.
    f.write("SBCK", 4);
    put_u32(f, c.version);
    put_u64(f, c.seed);
    f.put(c.config.use_skip ? 1 : 0);
    put_u32(f, static_cast<std::uint32_t>(c.config.base_channels));
    put_u32(f, static_cast<std::uint32_t>(c.config.input_size));
    put_u32(f, static_cast<std::uint32_t>(c.epoch));
    put_f64(f, c.best_val_loss);
    put_u32(f, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        put_u32(f, static_cast<std::uint32_t>(name.size()));
        put_bytes(f, name.data(), name.size());
        put_u32(f, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u32(f, static_cast<std::uint32_t>(d));
        for (float v : t.data) put_f32(f, v);
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "SBCK", 4) != 0)
        throw std::runtime_error("load_checkpoint: '" + path + "' is not a checkpoint file");
    Checkpoint c;
    c.version = get_u32(f);
    if (c.version != 1)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(c.version) + " in '" + path + "'");
    c.seed = get_u64(f);
    c.config.use_skip = f.get() != 0;
    c.config.base_channels = static_cast<int>(get_u32(f));
    c.config.input_size = static_cast<int>(get_u32(f));
    c.epoch = static_cast<int>(get_u32(f));
    c.best_val_loss = get_f64(f);
    const std::uint32_t n = get_u32(f);
    for (std::uint32_t i = 0; i < n && f; ++i) {
        const std::uint32_t len = get_u32(f);
        std::string name(len, '\0');
        f.read(name.data(), len);
        const std::uint32_t ndim = get_u32(f);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(get_u32(f));
        Tensor t(shape);
        for (float& v : t.data) v = get_f32(f);
        c.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (!f) throw std::runtime_error("load_checkpoint: truncated file '" + path + "'");
    return c;
}

TrainResult train_on_images(Network& net, const std::vector<GrayImage>& train_images,
                            const std::vector<GrayImage>& val_images, const TrainConfig& cfg) {
    if (train_images.empty() || val_images.empty())
        throw std::invalid_argument("train: train and val splits must be non-empty");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("train: epochs and batch_size must be positive");
    if (cfg.noise_variances.empty())
        throw std::invalid_argument("train: noise_variances must be non-empty");
    const int S = net.config().input_size;
    for (const auto* set : {&train_images, &val_images})
        for (const auto& img : *set)
            if (img.height != S || img.width != S)
                throw std::invalid_argument("train: image " + std::to_string(img.height) + "x" +
                                            std::to_string(img.width) + " != network input " +
                                            std::to_string(S));

    const std::size_t n_train = train_images.size();
    const std::size_t n_var = cfg.noise_variances.size();

    std::vector<Tensor> clean_train(n_train);
    for (std::size_t i = 0; i < n_train; ++i) clean_train[i] = image_to_tensor(train_images[i]);

    // Fresh corruption per presentation: sample i at epoch e gets a variance
    // and noise field derived from (seed, e, i), so batch composition and
    // worker count cannot change what any sample sees.
    auto noisy_for = [&](std::size_t idx, int epoch) {
        const std::uint64_t key = mix_seed(static_cast<std::uint64_t>(epoch), idx);
        Rng pick(mix_seed(cfg.seed, kTagTrainVariance, key));
        const double var = cfg.noise_variances[pick.next_below(n_var)];
        const NoiseSpec spec{var, mix_seed(cfg.seed, kTagTrainNoise, key)};
        return image_to_tensor(add_speckle(train_images[idx], spec));
    };

    // Validation pairs cycle the variance grid; fixed noise keeps the
    // monitored loss comparable across epochs.
    std::vector<Tensor> noisy_val(val_images.size()), clean_val(val_images.size());
    for (std::size_t i = 0; i < val_images.size(); ++i) {
        const double var = cfg.noise_variances[i % n_var];
        const NoiseSpec spec{var, mix_seed(cfg.seed, kTagValNoise, static_cast<std::uint64_t>(i))};
        noisy_val[i] = image_to_tensor(add_speckle(val_images[i], spec));
        clean_val[i] = image_to_tensor(val_images[i]);
    }

    TrainResult res;
    double best_val = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(n_train);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(mix_seed(cfg.seed, kTagShuffle, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n_train; i > 1; --i)
            std::swap(order[i - 1], order[shuffle.next_below(i)]);

        double loss_acc = 0.0;
        for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
            const int b = static_cast<int>(end - start);
            Tensor noisy({b, 1, S, S}), clean({b, 1, S, S});
            const std::size_t plane = static_cast<std::size_t>(S) * S;
            for (std::size_t j = start; j < end; ++j) {
                const std::size_t idx = order[j];
                const Tensor corrupted = noisy_for(idx, epoch);
                std::copy(corrupted.data.begin(), corrupted.data.end(),
                          noisy.data.begin() + (j - start) * plane);
                std::copy(clean_train[idx].data.begin(), clean_train[idx].data.end(),
                          clean.data.begin() + (j - start) * plane);
            }
            const double loss = net.train_step(noisy, clean, cfg.learning_rate);
            if (!std::isfinite(loss))
                throw TrainDivergence("train: non-finite loss in epoch " + std::to_string(epoch) +
                                          " (last finite epoch " + std::to_string(epoch - 1) + ")",
                                      epoch - 1);
            loss_acc += loss * b;
        }
        const double train_loss = loss_acc / static_cast<double>(n_train);

        double val_acc = 0.0;
        for (std::size_t i = 0; i < noisy_val.size(); ++i) {
            const Tensor out = net.forward(noisy_val[i]);
            val_acc += mse_loss(out, clean_val[i]).value;
        }
        const double val_loss = val_acc / static_cast<double>(noisy_val.size());
        if (!std::isfinite(val_loss))
            throw TrainDivergence("train: non-finite validation loss in epoch " +
                                      std::to_string(epoch) + " (last finite epoch " +
                                      std::to_string(epoch - 1) + ")",
                                  epoch - 1);

        res.history.train_loss.push_back(train_loss);
        res.history.val_loss.push_back(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            res.best = net.to_checkpoint(epoch, best_val, cfg.seed);
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (cfg.patience > 0 && stale_epochs >= cfg.patience) break;
        }
    }
    return res;
}

TrainResult train(Network& net, const DatasetManifest& manifest, const TrainConfig& cfg) {
    const int S = net.config().input_size;
    auto load_split = [&](Split s) {
        std::vector<GrayImage> out;
        for (const auto* e : manifest.in_split(s))
            out.push_back(resize_bilinear(load_png(e->path), S, S));
        return out;
    };
    const auto train_images = load_split(Split::train);
    const auto val_images = load_split(Split::val);
    return train_on_images(net, train_images, val_images, cfg);
}

GrayImage denoise(const Network& net, const GrayImage& img) {
    const int S = net.config().input_size;
    if (img.height != S || img.width != S)
        throw std::invalid_argument("denoise: image " + std::to_string(img.height) + "x" +
                                    std::to_string(img.width) + " != network input " +
                                    std::to_string(S) + "x" + std::to_string(S));
    const Tensor out = net.forward(image_to_tensor(img));
    GrayImage res(S, S);
    for (std::size_t i = 0; i < res.pixels.size(); ++i)
        res.pixels[i] = std::clamp(out.data[i], 0.0f, 1.0f);
    return res;
}

GrayImage denoise(const Checkpoint& checkpoint, const GrayImage& img) {
    const Network net = Network::from_checkpoint(checkpoint);
    return denoise(net, img);
}

} // namespace sbench
