// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "nif/error.hpp"

namespace nif {

/// Adam hyperparameters plus the step counter of the parameter set they drive.
struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
    double learning_rate = 0.005;
    uint64_t step_count = 0;

    void validate() const {
        if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw Error("Adam betas must lie in (0, 1)");
        if (!(epsilon >= 0) || !(learning_rate >= 0)) throw Error("Adam epsilon and learning rate must be nonnegative");
    }
};

/// Bias-correction factors for the step about to be taken (step_count + 1).
struct AdamStepScale {
    double m_scale;  // 1 / (1 - beta1^t)
    double v_scale;  // 1 / (1 - beta2^t)

    explicit AdamStepScale(const AdamParams &p) {
        double t = double(p.step_count + 1);
        m_scale = 1.0 / (1.0 - std::pow(p.beta1, t));
        v_scale = 1.0 / (1.0 - std::pow(p.beta2, t));
    }
};

/// One bias-corrected Adam update of a single scalar. The gradient is consumed.
template <typename T>
inline void adam_update(T &param, T &grad, T &m, T &v, const AdamParams &p, const AdamStepScale &s) {
    const double g = double(grad);
    const double mn = p.beta1 * double(m) + (1.0 - p.beta1) * g;
    const double vn = p.beta2 * double(v) + (1.0 - p.beta2) * g * g;
    m = T(mn);
    v = T(vn);
    const double m_hat = mn * s.m_scale;
    const double v_hat = vn * s.v_scale;
    param = T(double(param) - p.learning_rate * m_hat / (std::sqrt(v_hat) + p.epsilon));
    grad = T(0);
}

}  // namespace nif
