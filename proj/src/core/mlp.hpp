#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/experiment.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace pdedpc {

struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major [in x out]
    std::vector<double> b;  // [out]
};

struct Mlp {
    std::vector<DenseLayer> layers;  // hidden layers + final linear layer
    Activation activation = Activation::Tanh;

    int input_dim() const { return layers.front().in; }
    int output_dim() const { return layers.back().out; }
};

// Uniform fan-in init (U(-1/sqrt(in), 1/sqrt(in))), zero biases.
Mlp make_mlp(int input, int width, int hidden_layers, int output, Activation act, Rng& rng);

// No-tape forward for a row-major batch [rows x input_dim]. Shares kernels
// with the tape ops, so results are bitwise identical to the tape path.
std::vector<double> mlp_eval(const Mlp& net, std::span<const double> x, int rows);

struct LiftedMlp {
    std::vector<ad::Tensor> w;
    std::vector<ad::Tensor> b;
};

LiftedMlp lift_mlp(ad::Tape& tape, const Mlp& net, bool trainable);
ad::Tensor mlp_apply(const Mlp& net, const LiftedMlp& lifted, const ad::Tensor& x);

std::size_t param_count(const Mlp& net);
void append_params(const Mlp& net, std::vector<double>& out);
void read_params(Mlp& net, std::span<const double> flat, std::size_t& offset);
// Gradients in the append_params order; zero where backward never reached.
void append_grads(const LiftedMlp& lifted, std::vector<double>& out);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, double beta1, double beta2, double eps);

}  // namespace pdedpc
