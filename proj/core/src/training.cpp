#include "promet/training.hpp"

#include <cmath>

#include "promet/errors.hpp"

namespace promet {

void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw DataError("lr must be > 0");
    if (cfg.total_steps < 0) throw DataError("total_steps must be >= 0");
    if (!(cfg.warmup_frac > 0.0 && cfg.warmup_frac < 1.0)) {
        throw DataError("warmup_frac must lie strictly inside (0,1)");
    }
    if (cfg.weight_decay < 0.0) throw DataError("weight_decay must be >= 0");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw DataError("adam betas must lie in [0,1)");
    }
    if (!(cfg.adam_eps > 0.0)) throw DataError("adam_eps must be > 0");
    if (cfg.way < 1 || cfg.shot < 1 || cfg.query_shot < 0) {
        throw DataError("way and shot must be >= 1");
    }
}

double lr_at(int step, const TrainConfig& cfg) {
    if (step < 0 || step > cfg.total_steps) {
        throw DataError("lr_at: step " + std::to_string(step) + " outside [0, " +
                        std::to_string(cfg.total_steps) + "]");
    }
    double warmup = cfg.warmup_frac * cfg.total_steps;
    if (step < warmup) return cfg.lr * static_cast<double>(step) / warmup;
    if (cfg.schedule == LrSchedule::constant) return cfg.lr;
    double tail = cfg.total_steps - warmup;
    if (tail <= 0.0) return 0.0;
    return cfg.lr * static_cast<double>(cfg.total_steps - step) / tail;
}

void adamw_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                const TrainConfig& cfg, int step) {
    auto pv = tensor_views(params);
    auto gv = tensor_views(const_cast<ModelParams&>(grads));
    auto mv = tensor_views(state.first);
    auto vv = tensor_views(state.second);
    if (pv.size() != gv.size() || pv.size() != mv.size() || pv.size() != vv.size()) {
        throw DataError("adamw_step: tensor layout mismatch");
    }

    double lr = lr_at(step, cfg);
    state.step += 1;
    double t = static_cast<double>(state.step);
    double bc1 = 1.0 - std::pow(cfg.beta1, t);
    double bc2 = 1.0 - std::pow(cfg.beta2, t);

    for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i].size != gv[i].size) {
            throw DataError("adamw_step: gradient shape mismatch for " + pv[i].name);
        }
        double* p = pv[i].data;
        const double* g = gv[i].data;
        double* m = mv[i].data;
        double* v = vv[i].data;
        double decay = pv[i].decay ? 1.0 - lr * cfg.weight_decay : 1.0;
        bool ok = true;
        for (std::size_t k = 0; k < pv[i].size; ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            double m_hat = m[k] / bc1;
            double v_hat = v[k] / bc2;
            double next = p[k] * decay - lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
            ok &= std::isfinite(next);
            p[k] = next;
        }
        if (!ok) throw NumericError("non-finite update for tensor " + pv[i].name);
    }
}

TrainResult train(const Dataset& train_set, const TrainConfig& cfg, ModelParams init) {
    validate_train_config(cfg);
    validate_config(init.config);
    TrainResult result{std::move(init), {}};
    result.log.reserve(cfg.total_steps);

    OptimizerState state(result.params);
    ModelParams grads = zeros_like(result.params);
    auto grad_views = tensor_views(grads);
    Rng rng(cfg.seed);
    SamplerConfig sampler{cfg.way, cfg.shot, cfg.query_shot > 0 ? cfg.query_shot : cfg.shot, 0};

    for (int step = 0; step < cfg.total_steps; ++step) {
        Episode ep = sample_episode(train_set, sampler, rng);
        for (auto& v : grad_views) std::fill(v.data, v.data + v.size, 0.0);
        double loss;
        try {
            loss = episode_gradient(result.params, ep, train_set.label_set, grads);
            adamw_step(result.params, grads, state, cfg, step);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at step " + std::to_string(step));
        }
        result.log.push_back({step, loss, lr_at(step, cfg)});
    }
    return result;
}

GradCheckReport finite_diff_check(const ModelParams& m, const Episode& ep, const LabelSet& ls,
                                  double tolerance, double step_size) {
    constexpr double kDenomFloor = 1e-4;
    ModelParams analytic = zeros_like(m);
    episode_gradient(m, ep, ls, analytic);

    ModelParams probe = m;
    auto probe_views = tensor_views(probe);
    auto grad_views = tensor_views(analytic);

    GradCheckReport report;
    for (std::size_t t = 0; t < probe_views.size(); ++t) {
        GradCheckEntry entry{probe_views[t].name, 0.0};
        for (std::size_t k = 0; k < probe_views[t].size; ++k) {
            double saved = probe_views[t].data[k];
            probe_views[t].data[k] = saved + step_size;
            double up = episode_loss(probe, ep, ls);
            probe_views[t].data[k] = saved - step_size;
            double down = episode_loss(probe, ep, ls);
            probe_views[t].data[k] = saved;
            double numeric = (up - down) / (2.0 * step_size);
            double a = grad_views[t].data[k];
            double denom = std::max({kDenomFloor, std::abs(a), std::abs(numeric)});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(a - numeric) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.tensors.push_back(std::move(entry));
    }
    report.pass = report.max_rel_err <= tolerance;
    return report;
}

}  // namespace promet
