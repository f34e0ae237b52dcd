#include <benchmark/benchmark.h>

#include <span>

#include "promet/episodes.hpp"
#include "promet/gaussian_metric.hpp"
#include "promet/model.hpp"
#include "promet/synthetic.hpp"
#include "promet/training.hpp"

namespace {

using namespace promet;

SyntheticConfig small_corpus_config() {
    SyntheticConfig cfg;
    cfg.sentences = 400;
    cfg.entity_types = 6;
    cfg.seed = 7;
    return cfg;
}

ModelConfig small_model_config() {
    ModelConfig cfg;
    cfg.vocab_hash_dim = 4096;
    cfg.hidden_dim = 32;
    cfg.layer_count = 2;
    cfg.gauss_dim = 64;
    return cfg;
}

struct BenchFixture {
    Dataset data;
    ModelParams model;
    Episode episode;

    BenchFixture()
        : data(make_synthetic_dataset(small_corpus_config())),
          model(init_model(small_model_config(), 1)),
          episode(sample_episodes(data, SamplerConfig{5, 2, 2, 3}, 1).at(0)) {}
};

BenchFixture& fixture() {
    static BenchFixture f;
    return f;
}

void bm_encode_sentence(benchmark::State& state) {
    auto& f = fixture();
    const auto& tokens = f.episode.support.front().tokens;
    auto prompts = option_annotations(f.data.label_set, f.episode.target_labels);
    PromptedSequence prompted = option_prefix(tokens, prompts);
    for (auto _ : state) {
        Matrix h = encode(f.model.encoder, prompted);
        benchmark::DoNotOptimize(h.data.data());
    }
}
BENCHMARK(bm_encode_sentence);

void bm_js_distance(benchmark::State& state) {
    auto& f = fixture();
    auto prompts = option_annotations(f.data.label_set, f.episode.target_labels);
    Matrix rep = represent_support(f.model.encoder, f.episode.support.front(), f.data.label_set,
                                   prompts, f.model.config.rho, f.model.config.variant);
    GaussianEmbedding a =
        project(f.model.heads, std::span<const double>(rep.row(0), rep.cols));
    GaussianEmbedding b =
        project(f.model.heads, std::span<const double>(rep.row(rep.rows - 1), rep.cols));
    for (auto _ : state) {
        double d = js_distance(a, b);
        benchmark::DoNotOptimize(d);
    }
}
BENCHMARK(bm_js_distance);

void bm_episode_loss(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        double loss = episode_loss(f.model, f.episode, f.data.label_set);
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(bm_episode_loss);

void bm_episode_gradient(benchmark::State& state) {
    auto& f = fixture();
    ModelParams grads = zeros_like(f.model);
    for (auto _ : state) {
        double loss = episode_gradient(f.model, f.episode, f.data.label_set, grads);
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(bm_episode_gradient);

void bm_sample_episode(benchmark::State& state) {
    auto& f = fixture();
    SamplerConfig cfg{5, 2, 2, 0};
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.seed = seed++;
        auto eps = sample_episodes(f.data, cfg, 1);
        benchmark::DoNotOptimize(eps.front().support.size());
    }
}
BENCHMARK(bm_sample_episode);

}  // namespace

int main(int argc, char** argv) {
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    return 0;
}
