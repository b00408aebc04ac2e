#include "core/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "core/kernels.hpp"

namespace pdedpc {

Mlp make_mlp(int input, int width, int hidden_layers, int output, Activation act, Rng& rng) {
    if (input < 1 || width < 1 || hidden_layers < 1 || output < 1)
        throw std::runtime_error("make_mlp: non-positive dimension");
    Mlp net;
    net.activation = act;
    int in = input;
    for (int l = 0; l <= hidden_layers; ++l) {
        const int out = (l == hidden_layers) ? output : width;
        DenseLayer layer;
        layer.in = in;
        layer.out = out;
        layer.w.resize(static_cast<std::size_t>(in) * out);
        layer.b.assign(static_cast<std::size_t>(out), 0.0);
        const double s = 1.0 / std::sqrt(static_cast<double>(in));
        for (auto& v : layer.w) v = rng.uniform(-s, s);
        net.layers.push_back(std::move(layer));
        in = out;
    }
    return net;
}

std::vector<double> mlp_eval(const Mlp& net, std::span<const double> x, int rows) {
    if (rows < 1 || x.size() != static_cast<std::size_t>(rows) *
                                    static_cast<std::size_t>(net.input_dim()))
        throw std::runtime_error("mlp_eval: input size mismatch");
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    const std::size_t n_layers = net.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const DenseLayer& layer = net.layers[l];
        next.resize(static_cast<std::size_t>(rows) * layer.out);
        // Same order as the tape Linear op: bias prefill, then gemm.
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < layer.out; ++j)
                next[static_cast<std::size_t>(r) * layer.out + j] = layer.b[static_cast<std::size_t>(j)];
        kernels::gemm_acc_nn(next.data(), cur.data(), layer.w.data(), rows, layer.in, layer.out);
        if (l + 1 < n_layers) {
            if (net.activation == Activation::Tanh)
                for (auto& v : next) v = std::tanh(v);
            else
                for (auto& v : next) v = kernels::silu(v);
        }
        cur.swap(next);
    }
    return cur;
}

LiftedMlp lift_mlp(ad::Tape& tape, const Mlp& net, bool trainable) {
    LiftedMlp lifted;
    lifted.w.reserve(net.layers.size());
    lifted.b.reserve(net.layers.size());
    for (const DenseLayer& layer : net.layers) {
        lifted.w.push_back(tape.leaf(ad::Shape{layer.in, layer.out}, layer.w, trainable));
        lifted.b.push_back(tape.leaf(ad::Shape{layer.out}, layer.b, trainable));
    }
    return lifted;
}

ad::Tensor mlp_apply(const Mlp& net, const LiftedMlp& lifted, const ad::Tensor& x) {
    ad::Tensor h = x;
    const std::size_t n_layers = net.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        h = ad::linear(h, lifted.w[l], lifted.b[l]);
        if (l + 1 < n_layers)
            h = net.activation == Activation::Tanh ? ad::tanh(h) : ad::silu(h);
    }
    return h;
}

std::size_t param_count(const Mlp& net) {
    std::size_t n = 0;
    for (const DenseLayer& layer : net.layers) n += layer.w.size() + layer.b.size();
    return n;
}

void append_params(const Mlp& net, std::vector<double>& out) {
    for (const DenseLayer& layer : net.layers) {
        out.insert(out.end(), layer.w.begin(), layer.w.end());
        out.insert(out.end(), layer.b.begin(), layer.b.end());
    }
}

void read_params(Mlp& net, std::span<const double> flat, std::size_t& offset) {
    for (DenseLayer& layer : net.layers) {
        if (offset + layer.w.size() + layer.b.size() > flat.size())
            throw std::runtime_error("read_params: parameter blob too short");
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                  flat.begin() + static_cast<std::ptrdiff_t>(offset + layer.w.size()),
                  layer.w.begin());
        offset += layer.w.size();
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                  flat.begin() + static_cast<std::ptrdiff_t>(offset + layer.b.size()),
                  layer.b.begin());
        offset += layer.b.size();
    }
}

void append_grads(const LiftedMlp& lifted, std::vector<double>& out) {
    for (std::size_t l = 0; l < lifted.w.size(); ++l) {
        for (const ad::Tensor* t : {&lifted.w[l], &lifted.b[l]}) {
            const auto g = t->grad();
            if (g.empty())
                out.insert(out.end(), t->numel(), 0.0);
            else
                out.insert(out.end(), g.begin(), g.end());
        }
    }
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::runtime_error("adam_step: size mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace pdedpc
