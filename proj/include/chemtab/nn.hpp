#pragma once

// Dense-network engine: forward/backward for ReLU MLPs, Adam, inverted
// dropout, Glorot-uniform init, MAE, early stopping and checkpoint IO.
// Batches are row-major: each row of X is one sample, so a layer computes
// X W^T + b.

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "chemtab/errors.hpp"
#include "chemtab/rng.hpp"
#include "chemtab/types.hpp"

namespace chemtab::nn {

enum class Activation { Linear, Relu };

struct DenseLayer {
    Matrix W; // out x in
    Vector b; // out
    Activation activation = Activation::Linear;

    Index in_size() const { return W.cols(); }
    Index out_size() const { return W.rows(); }

    void check() const {
        if (W.rows() != b.size())
            throw DimensionError("dense layer: W rows != b size");
        if (!W.allFinite() || !b.allFinite())
            throw NumericError("dense layer: non-finite parameter");
    }
};

struct NetworkSpec {
    std::vector<Index> sizes;         // m_0 .. m_L
    std::vector<Activation> acts;     // one per layer
    double dropout = 0.0;             // applied to hidden activations

    Index n_layers() const { return static_cast<Index>(acts.size()); }

    void check() const {
        if (sizes.size() < 2)
            throw DomainError("network spec: need at least one layer");
        if (acts.size() != sizes.size() - 1)
            throw DimensionError("network spec: one activation per layer required");
        for (Index m : sizes)
            if (m < 1)
                throw DomainError("network spec: layer sizes must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0))
            throw DomainError("network spec: dropout must lie in [0,1)");
    }

    // Hidden layers ReLU, output linear.
    static NetworkSpec relu_mlp(std::vector<Index> layer_sizes, double dropout_rate = 0.0) {
        NetworkSpec spec;
        spec.sizes = std::move(layer_sizes);
        if (spec.sizes.size() < 2)
            throw DomainError("network spec: need at least one layer");
        spec.acts.assign(spec.sizes.size() - 1, Activation::Relu);
        spec.acts.back() = Activation::Linear;
        spec.dropout = dropout_rate;
        spec.check();
        return spec;
    }
};

struct Network {
    std::vector<DenseLayer> layers;
    double dropout = 0.0;

    Index n_layers() const { return static_cast<Index>(layers.size()); }
    Index n_inputs() const {
        if (layers.empty())
            throw StateError("network: no layers");
        return layers.front().in_size();
    }
    Index n_outputs() const {
        if (layers.empty())
            throw StateError("network: no layers");
        return layers.back().out_size();
    }

    NetworkSpec spec() const {
        NetworkSpec s;
        s.dropout = dropout;
        s.sizes.push_back(n_inputs());
        for (const auto& l : layers) {
            s.sizes.push_back(l.out_size());
            s.acts.push_back(l.activation);
        }
        return s;
    }

    void check() const {
        if (layers.empty())
            throw StateError("network: no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].check();
            if (l > 0 && layers[l].in_size() != layers[l - 1].out_size())
                throw DimensionError("network: layer " + std::to_string(l) +
                                     " input does not match previous output");
        }
        if (!(dropout >= 0.0 && dropout < 1.0))
            throw DomainError("network: dropout must lie in [0,1)");
    }
};

// Weights ~ U(-a, a) with a = sqrt(6/(fan_in+fan_out)); biases zero.
// Draw order is fixed (layers in order, W row by row) so a seed pins every
// parameter.
inline Network init_uniform(const NetworkSpec& spec, std::uint64_t seed) {
    spec.check();
    rng::Stream rs(rng::derive_seed(seed, "nn.init"));
    Network net;
    net.dropout = spec.dropout;
    for (Index l = 0; l < spec.n_layers(); ++l) {
        DenseLayer layer;
        const Index fan_in = spec.sizes[static_cast<std::size_t>(l)];
        const Index fan_out = spec.sizes[static_cast<std::size_t>(l) + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        layer.W.resize(fan_out, fan_in);
        for (Index i = 0; i < fan_out; ++i)
            for (Index j = 0; j < fan_in; ++j)
                layer.W(i, j) = rs.uniform(-a, a);
        layer.b = Vector::Zero(fan_out);
        layer.activation = spec.acts[static_cast<std::size_t>(l)];
        net.layers.push_back(std::move(layer));
    }
    return net;
}

// Inverted-scaling keep mask: entries are 1/(1-rate) with probability
// 1-rate, else 0. Training-time only; evaluation skips masking entirely.
inline Matrix dropout_mask(double rate, Index rows, Index cols, rng::Stream& rs) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw DomainError("dropout: rate must lie in [0,1)");
    Matrix mask(rows, cols);
    if (rate == 0.0) {
        mask.setOnes();
        return mask;
    }
    const double keep = 1.0 - rate;
    const double inv = 1.0 / keep;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            mask(i, j) = rs.next_double() < keep ? inv : 0.0;
    return mask;
}

struct ForwardCache {
    std::vector<Matrix> acts;  // acts[0] = X, acts[l+1] = output of layer l
    std::vector<Matrix> pre;   // pre-activation of layer l
    std::vector<Matrix> masks; // dropout mask of layer l (empty if none)
    bool ready = false;
};

namespace detail {

inline Matrix forward_impl(const Network& net, const Matrix& X, ForwardCache* cache,
                           rng::Stream* dropout_rs) {
    const Index L = net.n_layers();
    if (X.cols() != net.n_inputs())
        throw DimensionError("forward: input has " + std::to_string(X.cols()) +
                             " columns, network expects " + std::to_string(net.n_inputs()));
    if (cache) {
        cache->acts.assign(static_cast<std::size_t>(L) + 1, Matrix());
        cache->pre.assign(static_cast<std::size_t>(L), Matrix());
        cache->masks.assign(static_cast<std::size_t>(L), Matrix());
        cache->acts[0] = X;
        cache->ready = false;
    }
    Matrix a = X;
    for (Index l = 0; l < L; ++l) {
        const DenseLayer& layer = net.layers[static_cast<std::size_t>(l)];
        Matrix p = a * layer.W.transpose();
        p.rowwise() += layer.b.transpose();
        Matrix h = layer.activation == Activation::Relu ? p.cwiseMax(0.0).eval() : p;
        if (dropout_rs && net.dropout > 0.0 && l + 1 < L) {
            Matrix mask = dropout_mask(net.dropout, h.rows(), h.cols(), *dropout_rs);
            h = h.cwiseProduct(mask);
            if (cache)
                cache->masks[static_cast<std::size_t>(l)] = std::move(mask);
        }
        if (cache) {
            cache->pre[static_cast<std::size_t>(l)] = std::move(p);
            cache->acts[static_cast<std::size_t>(l) + 1] = h;
        }
        a = std::move(h);
    }
    if (cache)
        cache->ready = true;
    return a;
}

} // namespace detail

// Deterministic evaluation pass (dropout disabled).
inline Matrix forward(const Network& net, const Matrix& X, ForwardCache* cache = nullptr) {
    return detail::forward_impl(net, X, cache, nullptr);
}

inline Vector forward(const Network& net, const Vector& x) {
    Matrix X = x.transpose();
    return forward(net, X).row(0).transpose();
}

// Training pass: applies inverted dropout to hidden activations when the
// network carries a nonzero rate; the cache keeps what backward() needs.
inline Matrix forward_train(const Network& net, const Matrix& X, ForwardCache& cache,
                            rng::Stream& rs) {
    return detail::forward_impl(net, X, &cache, &rs);
}

struct Gradients {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
};

// Reverse-mode sweep through the cached pass. `upstream` is dLoss/dOutput
// for the batch; ReLU uses subgradient 0 at exactly 0. Optionally reports
// dLoss/dInput.
inline Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& upstream,
                          Matrix* input_grad = nullptr) {
    if (!cache.ready)
        throw StateError("backward: run a forward pass first");
    const Index L = net.n_layers();
    if (cache.acts.size() != static_cast<std::size_t>(L) + 1)
        throw StateError("backward: cache does not match this network");
    if (upstream.rows() != cache.acts[0].rows() || upstream.cols() != net.n_outputs())
        throw DimensionError("backward: upstream gradient shape mismatch");

    Gradients g;
    g.dW.resize(static_cast<std::size_t>(L));
    g.db.resize(static_cast<std::size_t>(L));
    Matrix G = upstream;
    for (Index l = L - 1; l >= 0; --l) {
        const auto ul = static_cast<std::size_t>(l);
        const DenseLayer& layer = net.layers[ul];
        if (cache.masks[ul].size() > 0)
            G = G.cwiseProduct(cache.masks[ul]);
        if (layer.activation == Activation::Relu)
            G = G.cwiseProduct((cache.pre[ul].array() > 0.0).cast<double>().matrix());
        g.dW[ul] = G.transpose() * cache.acts[ul];
        g.db[ul] = G.colwise().sum().transpose();
        G = G * layer.W;
    }
    if (input_grad)
        *input_grad = std::move(G);
    return g;
}

// ---- flat parameter views ---------------------------------------------

// Layer order, W row-major then b; shared by Adam, checkpoints and the
// finite-difference harness.
inline Index param_count(const Network& net) {
    Index n = 0;
    for (const auto& l : net.layers)
        n += l.W.size() + l.b.size();
    return n;
}

inline Vector pack(const Network& net) {
    Vector flat(param_count(net));
    Index at = 0;
    for (const auto& l : net.layers) {
        for (Index i = 0; i < l.W.rows(); ++i)
            for (Index j = 0; j < l.W.cols(); ++j)
                flat[at++] = l.W(i, j);
        for (Index i = 0; i < l.b.size(); ++i)
            flat[at++] = l.b[i];
    }
    return flat;
}

inline Vector pack(const Network& net, const Gradients& g) {
    if (g.dW.size() != net.layers.size() || g.db.size() != net.layers.size())
        throw DimensionError("pack: gradient does not match network");
    Vector flat(param_count(net));
    Index at = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (Index i = 0; i < g.dW[l].rows(); ++i)
            for (Index j = 0; j < g.dW[l].cols(); ++j)
                flat[at++] = g.dW[l](i, j);
        for (Index i = 0; i < g.db[l].size(); ++i)
            flat[at++] = g.db[l][i];
    }
    return flat;
}

inline void unpack(Network& net, const Vector& flat) {
    if (flat.size() != param_count(net))
        throw DimensionError("unpack: flat vector does not match network");
    Index at = 0;
    for (auto& l : net.layers) {
        for (Index i = 0; i < l.W.rows(); ++i)
            for (Index j = 0; j < l.W.cols(); ++j)
                l.W(i, j) = flat[at++];
        for (Index i = 0; i < l.b.size(); ++i)
            l.b[i] = flat[at++];
    }
}

// ---- Adam ---------------------------------------------------------------

struct AdamState {
    Vector m, v;
    long t = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void init(Index n) {
        m = Vector::Zero(n);
        v = Vector::Zero(n);
        t = 0;
    }
};

// Standard bias-corrected update, in place.
inline void adam_step(AdamState& st, Vector& params, const Vector& grad) {
    if (st.m.size() != params.size() || st.v.size() != params.size())
        throw DimensionError("adam: state not initialized for this parameter count");
    if (grad.size() != params.size())
        throw DimensionError("adam: gradient length mismatch");
    ++st.t;
    st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
    st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    params.array() -=
        st.lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.eps);
}

// ---- loss, batching, early stopping ---------------------------------------

// Sequential accumulation: the result is independent of how the linear
// algebra backend chunks reductions.
inline double mae(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size())
        throw DimensionError("mae: length mismatch");
    if (pred.size() == 0)
        throw DomainError("mae: empty input");
    double acc = 0.0;
    for (Index i = 0; i < pred.size(); ++i)
        acc += std::abs(pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

struct TrainControl {
    long max_epochs = 500; // 20000 for long runs; 0 returns the initialized model
    Index batch_size = 32;
    long patience = 50;
    double val_fraction = 0.10;
    double lr = 0.001;
    std::uint64_t seed = 0;
    int verbose = 0;

    void check() const {
        if (max_epochs < 0)
            throw DomainError("train control: max_epochs must be >= 0");
        if (!(lr > 0.0))
            throw DomainError("train control: learning rate must be positive");
        if (batch_size < 1)
            throw DomainError("train control: batch size must be >= 1");
        if (patience < 1)
            throw DomainError("train control: patience must be >= 1");
        if (!(val_fraction >= 0.0 && val_fraction < 1.0))
            throw DomainError("train control: val_fraction must lie in [0,1)");
    }
};

// Shuffled mini-batch schedule for one epoch.
inline std::vector<std::vector<Index>> epoch_batches(Index n, Index batch_size, rng::Stream& rs) {
    if (n < 1)
        throw DomainError("epoch_batches: empty dataset");
    if (batch_size < 1)
        throw DomainError("epoch_batches: batch size must be >= 1");
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    rs.shuffle(idx);
    std::vector<std::vector<Index>> batches;
    for (Index at = 0; at < n; at += batch_size) {
        Index end = std::min(n, at + batch_size);
        batches.emplace_back(idx.begin() + at, idx.begin() + end);
    }
    return batches;
}

// Stops after `patience` epochs without improvement of the monitored metric
// and remembers the best-epoch parameter snapshot.
class EarlyStopper {
public:
    explicit EarlyStopper(long patience) : patience_(patience) {
        if (patience < 1)
            throw DomainError("early stopping: patience must be >= 1");
    }

    // Returns true when training should halt.
    bool update(long epoch, double metric, const Vector& params) {
        if (metric < best_) {
            best_ = metric;
            best_epoch_ = epoch;
            best_params_ = params;
            since_ = 0;
            return false;
        }
        return ++since_ >= patience_;
    }

    bool has_best() const { return best_epoch_ >= 0; }
    double best() const { return best_; }
    long best_epoch() const { return best_epoch_; }
    const Vector& best_params() const {
        if (!has_best())
            throw StateError("early stopping: no epoch recorded yet");
        return best_params_;
    }

private:
    long patience_;
    long since_ = 0;
    long best_epoch_ = -1;
    double best_ = std::numeric_limits<double>::infinity();
    Vector best_params_;
};

// ---- checkpoint IO --------------------------------------------------------

// Binary layout (little-endian throughout, doubles are IEEE-754 binary64):
//   magic "CTNN", u32 version = 1,
//   u64 tag length + tag bytes (free-form spec string),
//   u64 seed, f64 dropout,
//   u64 L, u64 sizes m_0..m_L, L activation bytes (0 linear, 1 relu),
//   then per layer: W row-major (m_{l+1} x m_l doubles), b (m_{l+1} doubles).
static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

namespace detail {

inline void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out)
        throw IoError("checkpoint: write failed");
}

inline void put_u32(std::ostream& out, std::uint32_t v) { put_bytes(out, &v, 4); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_bytes(out, &v, 8); }
inline void put_f64(std::ostream& out, double v) { put_bytes(out, &v, 8); }

inline void get_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw ParseError("checkpoint: truncated file");
}

inline std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v;
    get_bytes(in, &v, 4);
    return v;
}
inline std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v;
    get_bytes(in, &v, 8);
    return v;
}
inline double get_f64(std::istream& in) {
    double v;
    get_bytes(in, &v, 8);
    return v;
}

} // namespace detail

inline void write_network(std::ostream& out, const Network& net, std::uint64_t seed,
                          const std::string& tag) {
    net.check();
    detail::put_bytes(out, "CTNN", 4);
    detail::put_u32(out, 1);
    detail::put_u64(out, tag.size());
    detail::put_bytes(out, tag.data(), tag.size());
    detail::put_u64(out, seed);
    detail::put_f64(out, net.dropout);
    const NetworkSpec spec = net.spec();
    detail::put_u64(out, static_cast<std::uint64_t>(spec.n_layers()));
    for (Index m : spec.sizes)
        detail::put_u64(out, static_cast<std::uint64_t>(m));
    for (Activation a : spec.acts) {
        char code = a == Activation::Relu ? 1 : 0;
        detail::put_bytes(out, &code, 1);
    }
    for (const auto& l : net.layers) {
        for (Index i = 0; i < l.W.rows(); ++i)
            for (Index j = 0; j < l.W.cols(); ++j)
                detail::put_f64(out, l.W(i, j));
        for (Index i = 0; i < l.b.size(); ++i)
            detail::put_f64(out, l.b[i]);
    }
}

inline Network read_network(std::istream& in, std::uint64_t* seed = nullptr,
                            std::string* tag = nullptr) {
    char magic[4];
    detail::get_bytes(in, magic, 4);
    if (std::string_view(magic, 4) != "CTNN")
        throw ParseError("checkpoint: bad magic, not a network file");
    std::uint32_t version = detail::get_u32(in);
    if (version != 1)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    std::uint64_t tag_len = detail::get_u64(in);
    if (tag_len > (1u << 20))
        throw ParseError("checkpoint: implausible tag length");
    std::string tag_str(tag_len, '\0');
    if (tag_len > 0)
        detail::get_bytes(in, tag_str.data(), tag_len);
    std::uint64_t seed_val = detail::get_u64(in);
    double dropout = detail::get_f64(in);
    std::uint64_t L = detail::get_u64(in);
    if (L < 1 || L > (1u << 16))
        throw ParseError("checkpoint: implausible layer count");
    std::vector<Index> sizes(L + 1);
    for (auto& m : sizes) {
        std::uint64_t v = detail::get_u64(in);
        if (v < 1 || v > (1u << 24))
            throw ParseError("checkpoint: implausible layer size");
        m = static_cast<Index>(v);
    }
    std::vector<Activation> acts(L);
    for (auto& a : acts) {
        char code;
        detail::get_bytes(in, &code, 1);
        if (code != 0 && code != 1)
            throw ParseError("checkpoint: unknown activation code");
        a = code == 1 ? Activation::Relu : Activation::Linear;
    }
    Network net;
    net.dropout = dropout;
    for (std::uint64_t l = 0; l < L; ++l) {
        DenseLayer layer;
        layer.W.resize(sizes[l + 1], sizes[l]);
        for (Index i = 0; i < layer.W.rows(); ++i)
            for (Index j = 0; j < layer.W.cols(); ++j)
                layer.W(i, j) = detail::get_f64(in);
        layer.b.resize(sizes[l + 1]);
        for (Index i = 0; i < layer.b.size(); ++i)
            layer.b[i] = detail::get_f64(in);
        layer.activation = acts[l];
        net.layers.push_back(std::move(layer));
    }
    net.check();
    if (seed)
        *seed = seed_val;
    if (tag)
        *tag = tag_str;
    return net;
}

inline void save_network(const std::string& path, const Network& net, std::uint64_t seed,
                         const std::string& tag) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write file: " + path);
    write_network(out, net, seed, tag);
}

inline Network load_network(const std::string& path, std::uint64_t* seed = nullptr,
                            std::string* tag = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file: " + path);
    return read_network(in, seed, tag);
}

} // namespace chemtab::nn
