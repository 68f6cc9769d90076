// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Fully connected network: affine + leaky ReLU per hidden layer, then an
// affine output layer followed by sigmoid or identity.
//
// Weights are stored transposed (in x out) so the forward pass and the weight
// gradient vectorize over output units; an out x in mirror feeds the input
// gradient. Every per-sample computation uses the same operation order no
// matter how samples are batched.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nif/adam.hpp"
#include "nif/error.hpp"

namespace nif {

enum class OutputActivation { sigmoid, identity };

inline const char *to_string(OutputActivation a) { return a == OutputActivation::sigmoid ? "sigmoid" : "identity"; }

template <typename T>
struct DenseLayer {
    int in = 0, out = 0;
    std::vector<T> wt;  // in x out, wt[i * out + o] = W(o, i)
    std::vector<T> w;   // out x in mirror of wt
    std::vector<T> bias;
    std::vector<T> grad_wt, grad_bias;
    std::vector<T> m_wt, v_wt, m_bias, v_bias;

    DenseLayer() = default;
    DenseLayer(int in_dim, int out_dim)
        : in(in_dim), out(out_dim), wt(size_t(in_dim) * out_dim), w(size_t(in_dim) * out_dim), bias(out_dim),
          grad_wt(wt.size()), grad_bias(out_dim), m_wt(wt.size()), v_wt(wt.size()), m_bias(out_dim),
          v_bias(out_dim) {}

    T weight(int o, int i) const { return wt[size_t(i) * out + o]; }
    void set_weight(int o, int i, T value) {
        wt[size_t(i) * out + o] = value;
        w[size_t(o) * in + i] = value;
    }
    T weight_grad(int o, int i) const { return grad_wt[size_t(i) * out + o]; }

    void sync_mirror() {
        for (int i = 0; i < in; ++i)
            for (int o = 0; o < out; ++o) w[size_t(o) * in + i] = wt[size_t(i) * out + o];
    }

    /// z = W x + b for one sample.
    void affine(const T *x, T *z) const {
        for (int o = 0; o < out; ++o) z[o] = bias[o];
        for (int i = 0; i < in; ++i) {
            const T xi = x[i];
            const T *row = wt.data() + size_t(i) * out;
            for (int o = 0; o < out; ++o) z[o] += row[o] * xi;
        }
    }
};

template <typename T>
class Mlp {
  public:
    Mlp() = default;

    Mlp(int input_dim, std::vector<int> hidden_widths, int output_dim,
        OutputActivation output_activation = OutputActivation::sigmoid, T leaky_slope = T(0.01))
        : input_dim_(input_dim), output_dim_(output_dim), output_activation_(output_activation),
          leaky_slope_(leaky_slope) {
        if (input_dim < 1 || output_dim < 1) throw Error("mlp: input and output dims must be >= 1");
        int prev = input_dim;
        for (int width : hidden_widths) {
            if (width < 1) throw Error("mlp: hidden widths must be >= 1");
            layers_.emplace_back(prev, width);
            prev = width;
        }
        layers_.emplace_back(prev, output_dim);
    }

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    OutputActivation output_activation() const { return output_activation_; }
    T leaky_slope() const { return leaky_slope_; }
    std::vector<DenseLayer<T>> &layers() { return layers_; }
    const std::vector<DenseLayer<T>> &layers() const { return layers_; }
    AdamParams &adam() { return adam_; }
    const AdamParams &adam() const { return adam_; }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto &l : layers_) n += l.wt.size() + l.bias.size();
        return n;
    }

    /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    void xavier_init(uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (auto &l : layers_) {
            const double bound = std::sqrt(6.0 / double(l.in + l.out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (int o = 0; o < l.out; ++o)
                for (int i = 0; i < l.in; ++i) l.set_weight(o, i, T(dist(rng)));
            std::fill(l.bias.begin(), l.bias.end(), T(0));
        }
    }

    void zero_parameters() {
        for (auto &l : layers_) {
            std::fill(l.wt.begin(), l.wt.end(), T(0));
            std::fill(l.w.begin(), l.w.end(), T(0));
            std::fill(l.bias.begin(), l.bias.end(), T(0));
        }
    }

    /// Stateless batched evaluation; safe to call concurrently.
    void infer(std::span<const T> input, size_t batch, std::span<T> output) const {
        check_input(input, batch);
        if (output.size() != batch * size_t(output_dim_)) throw Error("mlp: output buffer has the wrong size");
        int widest = input_dim_;
        for (const auto &l : layers_) widest = std::max(widest, l.out);
        std::vector<T> a(widest), z(widest);
        for (size_t b = 0; b < batch; ++b) {
            std::copy_n(input.data() + b * input_dim_, input_dim_, a.data());
            for (size_t l = 0; l < layers_.size(); ++l) {
                const auto &layer = layers_[l];
                layer.affine(a.data(), z.data());
                if (l + 1 < layers_.size()) {
                    for (int o = 0; o < layer.out; ++o) a[o] = leaky(z[o]);
                } else {
                    T *dst = output.data() + b * output_dim_;
                    for (int o = 0; o < layer.out; ++o) dst[o] = apply_output(z[o]);
                }
            }
        }
    }

    std::vector<T> infer(std::span<const T> input, size_t batch) const {
        std::vector<T> out(batch * output_dim_);
        infer(input, batch, out);
        return out;
    }

    /// Training forward pass; caches activations for backward().
    std::span<const T> forward(std::span<const T> input, size_t batch) {
        check_input(input, batch);
        cached_batch_ = batch;
        acts_.resize(layers_.size() + 1);
        pre_.resize(layers_.size());
        acts_[0].assign(input.begin(), input.end());
        for (size_t l = 0; l < layers_.size(); ++l) {
            const auto &layer = layers_[l];
            pre_[l].resize(batch * layer.out);
            acts_[l + 1].resize(batch * layer.out);
            const bool last = l + 1 == layers_.size();
            for (size_t b = 0; b < batch; ++b) {
                T *z = pre_[l].data() + b * layer.out;
                layer.affine(acts_[l].data() + b * layer.in, z);
                T *a = acts_[l + 1].data() + b * layer.out;
                for (int o = 0; o < layer.out; ++o) a[o] = last ? apply_output(z[o]) : leaky(z[o]);
            }
        }
        has_cache_ = true;
        return acts_.back();
    }

    /// Accumulates parameter gradients for the cached batch and returns the
    /// gradient of the loss with respect to the inputs (batch x input_dim).
    std::vector<T> backward(std::span<const T> upstream) {
        if (!has_cache_) throw Error("mlp: backward called without a matching forward");
        const size_t batch = cached_batch_;
        if (upstream.size() != batch * size_t(output_dim_)) throw Error("mlp: upstream gradient has the wrong size");
        has_cache_ = false;

        // Gradient with respect to the output pre-activation.
        std::vector<T> dz(upstream.begin(), upstream.end());
        if (output_activation_ == OutputActivation::sigmoid) {
            const std::vector<T> &y = acts_.back();
            for (size_t k = 0; k < dz.size(); ++k) dz[k] *= y[k] * (T(1) - y[k]);
        }

        std::vector<T> dx;
        for (size_t l = layers_.size(); l-- > 0;) {
            auto &layer = layers_[l];
            const std::vector<T> &x = acts_[l];
            dx.assign(batch * layer.in, T(0));
            for (size_t b = 0; b < batch; ++b) {
                const T *d = dz.data() + b * layer.out;
                const T *xb = x.data() + b * layer.in;
                for (int o = 0; o < layer.out; ++o) layer.grad_bias[o] += d[o];
                for (int i = 0; i < layer.in; ++i) {
                    const T xi = xb[i];
                    T *g = layer.grad_wt.data() + size_t(i) * layer.out;
                    for (int o = 0; o < layer.out; ++o) g[o] += d[o] * xi;
                }
                T *dxb = dx.data() + b * layer.in;
                for (int o = 0; o < layer.out; ++o) {
                    const T dov = d[o];
                    const T *row = layer.w.data() + size_t(o) * layer.in;
                    for (int i = 0; i < layer.in; ++i) dxb[i] += row[i] * dov;
                }
            }
            if (l > 0) {
                // Through the leaky ReLU of the previous hidden layer.
                const std::vector<T> &zprev = pre_[l - 1];
                for (size_t k = 0; k < dx.size(); ++k)
                    if (!(zprev[k] > T(0))) dx[k] *= leaky_slope_;
                dz.swap(dx);
            }
        }
        return dx;
    }

    void zero_grad() {
        for (auto &l : layers_) {
            std::fill(l.grad_wt.begin(), l.grad_wt.end(), T(0));
            std::fill(l.grad_bias.begin(), l.grad_bias.end(), T(0));
        }
    }

    /// Bias-corrected Adam over all weights and biases; gradients are zeroed.
    void adam_step(AdamParams &params) {
        const AdamStepScale scale(params);
        for (auto &l : layers_) {
            for (size_t k = 0; k < l.wt.size(); ++k) adam_update(l.wt[k], l.grad_wt[k], l.m_wt[k], l.v_wt[k], params, scale);
            for (size_t k = 0; k < l.bias.size(); ++k)
                adam_update(l.bias[k], l.grad_bias[k], l.m_bias[k], l.v_bias[k], params, scale);
            l.sync_mirror();
        }
        ++params.step_count;
    }
    void adam_step() { adam_step(adam_); }

    /// Element-wise identical parameters.
    bool same_parameters(const Mlp &o) const {
        if (layers_.size() != o.layers_.size()) return false;
        for (size_t l = 0; l < layers_.size(); ++l)
            if (layers_[l].wt != o.layers_[l].wt || layers_[l].bias != o.layers_[l].bias) return false;
        return true;
    }

  private:
    T leaky(T z) const { return z > T(0) ? z : z * leaky_slope_; }
    T apply_output(T z) const {
        return output_activation_ == OutputActivation::sigmoid ? T(1) / (T(1) + std::exp(-z)) : z;
    }
    void check_input(std::span<const T> input, size_t batch) const {
        if (layers_.empty()) throw Error("mlp: network has no layers");
        if (input.size() != batch * size_t(input_dim_))
            throw Error("mlp: input width " + std::to_string(batch ? input.size() / batch : 0) +
                        " does not match input_dim " + std::to_string(input_dim_));
    }

    int input_dim_ = 0;
    int output_dim_ = 0;
    OutputActivation output_activation_ = OutputActivation::sigmoid;
    T leaky_slope_ = T(0.01);
    std::vector<DenseLayer<T>> layers_;
    AdamParams adam_;

    std::vector<std::vector<T>> acts_, pre_;
    size_t cached_batch_ = 0;
    bool has_cache_ = false;
};

template <typename T>
struct LossResult {
    double loss;
    std::vector<T> grad;
};

/// Mean squared error over all B * K entries and its gradient 2 (p - t) / (B K).
template <typename T>
LossResult<T> l2_loss(std::span<const T> pred, std::span<const T> target) {
    if (pred.size() != target.size()) throw Error("l2_loss: shape mismatch");
    if (pred.empty()) return {0.0, {}};
    const double inv = 1.0 / double(pred.size());
    LossResult<T> r{0.0, std::vector<T>(pred.size())};
    for (size_t k = 0; k < pred.size(); ++k) {
        const double d = double(pred[k]) - double(target[k]);
        r.loss += d * d;
        r.grad[k] = T(2.0 * d * inv);
    }
    r.loss *= inv;
    return r;
}

}  // namespace nif
