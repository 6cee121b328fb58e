#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spai {

struct AdamWConfig {
    double lr = 1e-3;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;  ///< steps taken
};

/// theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta), decay decoupled from the moments.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, const AdamWConfig& cfg);

} // namespace spai
