#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promet/model.hpp"

namespace promet {

enum class LrSchedule { constant, linear_decay };

struct TrainConfig {
    double lr = 3e-5;
    int total_steps = 10000;
    double warmup_frac = 0.10;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    LrSchedule schedule = LrSchedule::constant;
    int way = 5;
    int shot = 1;
    int query_shot = 0;  // 0: use shot
    std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& cfg);

// Linear ramp 0 -> lr over the warmup steps, then constant (or a linear
// decay to zero at total_steps).
double lr_at(int step, const TrainConfig& cfg);

// First and second moment accumulators, parameter-shaped.
struct OptimizerState {
    ModelParams first;
    ModelParams second;
    long long step = 0;

    explicit OptimizerState(const ModelParams& params)
        : first(zeros_like(params)), second(zeros_like(params)) {}
};

// Decoupled weight-decay Adam with bias correction. Decay is skipped for
// biases and gate scalars. step is the 0-based training step used for the
// schedule.
void adamw_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                const TrainConfig& cfg, int step);

struct StepLog {
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    ModelParams params;
    std::vector<StepLog> log;
};

// One sampled episode per step: forward, backward, AdamW update. Fully
// reproducible from (dataset, init, cfg.seed).
TrainResult train(const Dataset& train_set, const TrainConfig& cfg, ModelParams init);

struct GradCheckEntry {
    std::string tensor;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> tensors;
    double max_rel_err = 0.0;
    bool pass = false;
};

// Central finite differences on every element of every trainable tensor
// against the analytic episode gradient. Relative error uses a small
// magnitude floor so elements with negligible gradient do not amplify
// round-off noise.
GradCheckReport finite_diff_check(const ModelParams& m, const Episode& ep, const LabelSet& ls,
                                  double tolerance, double step_size = 1e-5);

}  // namespace promet
