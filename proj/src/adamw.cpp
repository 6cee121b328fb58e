#include "spai/adamw.hpp"

#include "spai/error.hpp"

#include <cmath>

namespace spai {

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, const AdamWConfig& cfg) {
    if (params.size() != grads.size()) throw DimensionMismatch("adamw: params and grads differ in length");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw DimensionMismatch("adamw: state does not match params");
    ++state.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * params[i]);
    }
}

} // namespace spai
