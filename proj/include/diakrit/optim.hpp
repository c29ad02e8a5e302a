#pragma once

// SGD with inverse-time learning-rate decay, and Adam. Both walk a flat
// parameter list (Param<T> pairs of value/gradient) and refuse to apply a
// non-finite gradient: a NaN here means an upstream bug, and silently folding
// it into the weights would waste a whole training run.

#include <cmath>
#include <string>
#include <vector>

#include "diakrit/layers.hpp"
#include "diakrit/tensor.hpp"

namespace diakrit {

template <typename T>
inline void check_grad_finite(const Param<T>& p, int64_t step) {
    if (!all_finite(*p.grad))
        throw Error("non-finite gradient in '" + p.name + "' at step " + std::to_string(step));
}

template <typename T>
struct Sgd {
    double lr = 0.01;
    double decay = 1e-4;

    double lr_at(int64_t step) const { return lr / (1.0 + decay * static_cast<double>(step)); }

    // p ← p − lr_t · g, with lr_t = lr / (1 + decay·step)
    void step(std::vector<Param<T>>& params, int64_t step_index) {
        T lr_t = static_cast<T>(lr_at(step_index));
        for (auto& p : params) {
            check_grad_finite(p, step_index);
            for (size_t i = 0; i < p.value->numel(); ++i) p.value->v[i] -= lr_t * p.grad->v[i];
        }
    }
};

template <typename T>
struct Adam {
    double lr = 0.001;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    // step_index counts from 0; the bias correction uses t = step_index + 1
    void step(std::vector<Param<T>>& params, int64_t step_index) {
        if (m_.empty()) {
            for (auto& p : params) {
                m_.emplace_back(p.value->shape);
                v_.emplace_back(p.value->shape);
            }
        }
        if (m_.size() != params.size())
            throw Error("adam state holds " + std::to_string(m_.size()) +
                        " parameters but step got " + std::to_string(params.size()));
        double t = static_cast<double>(step_index) + 1.0;
        double bc1 = 1.0 - std::pow(beta1, t), bc2 = 1.0 - std::pow(beta2, t);
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = params[pi];
            check_grad_finite(p, step_index);
            if (!m_[pi].same_shape(*p.value))
                throw Error("adam state shape mismatch for '" + p.name + "': " +
                            m_[pi].shape_str() + " vs " + p.value->shape_str());
            for (size_t i = 0; i < p.value->numel(); ++i) {
                double g = static_cast<double>(p.grad->v[i]);
                double m = beta1 * static_cast<double>(m_[pi].v[i]) + (1.0 - beta1) * g;
                double v = beta2 * static_cast<double>(v_[pi].v[i]) + (1.0 - beta2) * g * g;
                m_[pi].v[i] = static_cast<T>(m);
                v_[pi].v[i] = static_cast<T>(v);
                double mhat = m / bc1, vhat = v / bc2;
                p.value->v[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }

private:
    std::vector<Tensor<T>> m_, v_;
};

} // namespace diakrit
