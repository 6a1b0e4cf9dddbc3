#pragma once

#include <vector>

#include "toktrans/tensor.hpp"

namespace toktrans {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-5;
    double weight_decay = 0.0;
};

struct OptimizerState {
    std::vector<Tensor> m;  // first moments, shaped like the params
    std::vector<Tensor> v;  // second moments
    long step = 0;

    static OptimizerState init(const std::vector<Tensor*>& params);
};

// Decoupled weight decay, bias-corrected moments.
void adamw_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                OptimizerState& state, double lr_t, const AdamWConfig& cfg);

// Linear warmup from 0 over warmup_frac of total_steps, then cosine decay
// to final_frac * base_lr at total_steps.
struct Schedule {
    double base_lr = 1e-3;
    double warmup_frac = 0.2;
    double final_frac = 0.1;
    long total_steps = 1;
};

double lr_at(const Schedule& s, long step);

}  // namespace toktrans
