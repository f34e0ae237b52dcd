#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "promet/errors.hpp"
#include "promet/synthetic.hpp"
#include "promet/training.hpp"

using namespace promet;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.vocab_hash_dim = 64;
    cfg.hidden_dim = 8;
    cfg.layer_count = 2;
    cfg.gauss_dim = 6;
    return cfg;
}

Dataset tiny_corpus(std::uint64_t seed = 31) {
    SyntheticConfig cfg;
    cfg.sentences = 120;
    cfg.entity_types = 4;
    cfg.suffixes_per_type = 4;
    cfg.seed = seed;
    return make_synthetic_dataset(cfg);
}

bool params_equal(ModelParams& a, ModelParams& b) {
    auto va = tensor_views(a);
    auto vb = tensor_views(b);
    if (va.size() != vb.size()) return false;
    for (std::size_t i = 0; i < va.size(); ++i) {
        if (va[i].size != vb[i].size) return false;
        for (std::size_t j = 0; j < va[i].size; ++j) {
            if (va[i].data[j] != vb[i].data[j]) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("train config validation") {
    CHECK_NOTHROW(validate_train_config(TrainConfig{}));
    TrainConfig cfg;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(validate_train_config(cfg), DataError);
    cfg = TrainConfig{};
    cfg.warmup_frac = 1.5;
    CHECK_THROWS_AS(validate_train_config(cfg), DataError);
    cfg = TrainConfig{};
    cfg.total_steps = -1;
    CHECK_THROWS_AS(validate_train_config(cfg), DataError);
}

TEST_CASE("learning rate warms up linearly then holds") {
    TrainConfig cfg;  // lr 3e-5, 10000 steps, 10% warmup
    CHECK(lr_at(0, cfg) == 0.0);
    CHECK(lr_at(500, cfg) == doctest::Approx(1.5e-5).epsilon(1e-12));
    CHECK(lr_at(999, cfg) == doctest::Approx(3e-5 * 999.0 / 1000.0).epsilon(1e-12));
    CHECK(lr_at(1000, cfg) == doctest::Approx(3e-5).epsilon(1e-12));
    CHECK(lr_at(5000, cfg) == doctest::Approx(3e-5).epsilon(1e-12));
    CHECK(lr_at(10000, cfg) == doctest::Approx(3e-5).epsilon(1e-12));
    CHECK_THROWS_AS(lr_at(-1, cfg), DataError);
    CHECK_THROWS_AS(lr_at(10001, cfg), DataError);
}

TEST_CASE("linear decay reaches zero at the final step") {
    TrainConfig cfg;
    cfg.schedule = LrSchedule::linear_decay;
    CHECK(lr_at(500, cfg) == doctest::Approx(1.5e-5));
    CHECK(lr_at(1000, cfg) == doctest::Approx(3e-5));
    CHECK(lr_at(5500, cfg) == doctest::Approx(1.5e-5).epsilon(1e-9));
    CHECK(lr_at(10000, cfg) == doctest::Approx(0.0));
}

TEST_CASE("warmup boundary is continuous") {
    TrainConfig cfg;
    double before = lr_at(999, cfg);
    double at = lr_at(1000, cfg);
    CHECK(std::abs(at - before) <= cfg.lr / 1000.0 + 1e-15);
}

TEST_CASE("a fresh AdamW step moves a unit-gradient scalar by about lr") {
    ModelConfig mc;
    mc.vocab_hash_dim = 1;
    mc.hidden_dim = 1;
    mc.layer_count = 1;
    mc.gauss_dim = 1;
    ModelParams params(mc);
    params.encoder.embeddings.at(0, 0) = 1.0;

    ModelParams grads = zeros_like(params);
    grads.encoder.embeddings.at(0, 0) = 1.0;

    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.total_steps = 10;
    cfg.weight_decay = 0.0;

    OptimizerState state(params);
    adamw_step(params, grads, state, cfg, 5);  // past warmup: lr = 0.1
    // With bias correction at t=1, m_hat = g and v_hat = g^2, so the update
    // is lr * g / (|g| + eps).
    CHECK(params.encoder.embeddings.at(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(state.step == 1);
}

TEST_CASE("zero gradients with zero decay leave parameters unchanged") {
    ModelParams params = init_model(tiny_config(), 1);
    ModelParams before = params;
    ModelParams grads = zeros_like(params);
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.total_steps = 10;
    cfg.weight_decay = 0.0;
    OptimizerState state(params);
    adamw_step(params, grads, state, cfg, 5);
    CHECK(params_equal(params, before));
}

TEST_CASE("zero learning rate freezes parameters for any gradient") {
    ModelParams params = init_model(tiny_config(), 2);
    ModelParams before = params;
    ModelParams grads = init_model(tiny_config(), 3);  // arbitrary nonzero values
    TrainConfig cfg;
    cfg.lr = 1e-300;  // schedule output is numerically zero after scaling
    cfg.lr = 0.0;
    cfg.total_steps = 10;
    OptimizerState state(params);
    adamw_step(params, grads, state, cfg, 5);
    CHECK(params_equal(params, before));
}

TEST_CASE("weight decay touches weights but not biases or gates") {
    ModelParams params(tiny_config());
    for (auto& v : tensor_views(params)) {
        for (std::size_t i = 0; i < v.size; ++i) v.data[i] = 1.0;
    }
    ModelParams grads = zeros_like(params);
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.total_steps = 10;
    cfg.weight_decay = 0.5;
    OptimizerState state(params);
    adamw_step(params, grads, state, cfg, 5);

    for (auto& v : tensor_views(params)) {
        double expected = v.decay ? 1.0 - 0.1 * 0.5 : 1.0;
        for (std::size_t i = 0; i < v.size; ++i) {
            CHECK(v.data[i] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("non-finite updates name the tensor") {
    ModelParams params = init_model(tiny_config(), 4);
    ModelParams grads = zeros_like(params);
    grads.heads.b_mu[0] = std::nan("");
    TrainConfig cfg;
    cfg.total_steps = 10;
    OptimizerState state(params);
    try {
        adamw_step(params, grads, state, cfg, 5);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("heads.b_mu") != std::string::npos);
    }
}

TEST_CASE("zero steps return the initial parameters and an empty log") {
    Dataset d = tiny_corpus();
    ModelParams init = init_model(tiny_config(), 5);
    ModelParams reference = init;
    TrainConfig cfg;
    cfg.total_steps = 0;
    cfg.way = 2;
    cfg.shot = 1;
    TrainResult result = train(d, cfg, std::move(init));
    CHECK(result.log.empty());
    CHECK(params_equal(result.params, reference));
}

TEST_CASE("training is reproducible from the seed") {
    Dataset d = tiny_corpus();
    TrainConfig cfg;
    cfg.total_steps = 12;
    cfg.way = 2;
    cfg.shot = 1;
    cfg.lr = 1e-3;
    cfg.seed = 7;

    TrainResult a = train(d, cfg, init_model(tiny_config(), 8));
    TrainResult b = train(d, cfg, init_model(tiny_config(), 8));
    CHECK(params_equal(a.params, b.params));
    REQUIRE(a.log.size() == 12);
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].step == static_cast<int>(i));
        CHECK(a.log[i].loss == b.log[i].loss);
        CHECK(a.log[i].lr == lr_at(static_cast<int>(i), cfg));
    }

    cfg.seed = 8;
    TrainResult c = train(d, cfg, init_model(tiny_config(), 8));
    CHECK_FALSE(params_equal(a.params, c.params));
}

TEST_CASE("loss trends down over a short run") {
    Dataset d = tiny_corpus();
    TrainConfig cfg;
    cfg.total_steps = 200;
    cfg.way = 2;
    cfg.shot = 2;
    cfg.lr = 3e-3;
    cfg.seed = 3;
    TrainResult r = train(d, cfg, init_model(tiny_config(), 9));
    REQUIRE(r.log.size() == 200);

    double head = 0, tail = 0;
    for (int i = 0; i < 30; ++i) head += r.log[i].loss;
    for (int i = 170; i < 200; ++i) tail += r.log[i].loss;
    CHECK(tail / 30 < head / 30);
}

TEST_CASE("a poisoned initialization aborts with the step number") {
    Dataset d = tiny_corpus();
    ModelParams init = init_model(tiny_config(), 10);
    init.encoder.embeddings.at(0, 0) = std::nan("");
    TrainConfig cfg;
    cfg.total_steps = 3;
    cfg.way = 2;
    cfg.shot = 1;
    try {
        train(d, cfg, std::move(init));
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
}

TEST_CASE("analytic episode gradients pass the finite-difference check") {
    Dataset d = tiny_corpus();
    ModelConfig mc;
    mc.vocab_hash_dim = 32;
    mc.hidden_dim = 6;
    mc.layer_count = 2;
    mc.gauss_dim = 5;
    ModelParams m = init_model(mc, 11);
    Episode ep = sample_episodes(d, SamplerConfig{2, 1, 1, 13}, 1).at(0);

    GradCheckReport report = finite_diff_check(m, ep, d.label_set, 1e-4);
    CHECK(report.pass);
    CHECK(report.max_rel_err <= 1e-4);
    CHECK(report.tensors.size() == 13);  // embeddings + 2*4 layer tensors + 4 head tensors
    for (const auto& entry : report.tensors) {
        CHECK(entry.max_rel_err <= 1e-4);
    }
}

TEST_CASE("the finite-difference check rejects a wrong gradient tolerance") {
    Dataset d = tiny_corpus();
    ModelConfig mc;
    mc.vocab_hash_dim = 16;
    mc.hidden_dim = 4;
    mc.layer_count = 1;
    mc.gauss_dim = 3;
    ModelParams m = init_model(mc, 12);
    Episode ep = sample_episodes(d, SamplerConfig{2, 1, 1, 14}, 1).at(0);
    GradCheckReport report = finite_diff_check(m, ep, d.label_set, 0.0);
    CHECK_FALSE(report.pass);  // round-off alone exceeds a zero tolerance
}
