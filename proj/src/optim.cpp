#include "toktrans/optim.hpp"

#include <cmath>

namespace toktrans {

OptimizerState OptimizerState::init(const std::vector<Tensor*>& params) {
    OptimizerState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor* p : params) {
        s.m.push_back(Tensor::zeros(p->shape));
        s.v.push_back(Tensor::zeros(p->shape));
    }
    return s;
}

void adamw_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                OptimizerState& state, double lr_t, const AdamWConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ConfigError("adamw_step: parameter/gradient/state count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = grads[k];
        if (g.data.empty()) continue;  // parameter untouched by this graph
        if (g.shape != p.shape) throw ConfigError("adamw_step: gradient shape mismatch");
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= lr_t * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p.data[i]);
        }
        check_finite(p, "adamw_step");
    }
}

double lr_at(const Schedule& s, long step) {
    if (s.total_steps < 1) throw ConfigError("lr_at: total_steps must be >= 1");
    const double warmup = s.warmup_frac * static_cast<double>(s.total_steps);
    const double x = static_cast<double>(step);
    if (x <= warmup) return warmup > 0.0 ? s.base_lr * x / warmup : s.base_lr;
    const double t = (x - warmup) / (static_cast<double>(s.total_steps) - warmup);
    const double pi = 3.14159265358979323846;
    return s.base_lr * (s.final_frac + (1.0 - s.final_frac) * 0.5 * (1.0 + std::cos(pi * t)));
}

}  // namespace toktrans
