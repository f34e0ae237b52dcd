#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promet/encoding.hpp"
#include "promet/episodes.hpp"
#include "promet/gaussian_metric.hpp"

namespace promet {

struct ModelConfig {
    int vocab_hash_dim = 65536;
    int hidden_dim = 64;
    int layer_count = 3;
    int gauss_dim = 128;
    double rho = 0.7;
    PromptVariant variant = PromptVariant::option_label;

    bool operator==(const ModelConfig&) const = default;
};

// Throws DataError when a field is out of range (layer_count >= 1, dims >= 1,
// rho inside (0,1)).
void validate_config(const ModelConfig& cfg);

struct ModelParams {
    ModelConfig config;
    EncoderParams encoder;
    HeadParams heads;

    explicit ModelParams(const ModelConfig& cfg);
};

// Same shapes, every tensor zero. Also the gradient container.
ModelParams zeros_like(const ModelParams& m);

// Uniform fan-based init for embeddings and weight matrices, zero biases,
// gates (alpha, beta, gamma) = (1.0, 0.5, 0.5).
ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);

// Flat view over one named parameter tensor. decay marks tensors subject to
// weight decay (weight matrices and embeddings; biases and gates are exempt).
struct TensorView {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
    bool decay = false;
};

// Stable order: embeddings, per-layer gates and mixing matrix, head weights
// and biases. Checkpoints and the optimizer both follow this order.
std::vector<TensorView> tensor_views(ModelParams& m);

// Throws NumericError naming the first non-finite tensor.
void validate_finite(const ModelParams& m);

// manifest_ref, when nonempty, is recorded in the header so the artifact
// points back at the run manifest that produced it.
void save_checkpoint(const ModelParams& m, const std::string& path,
                     const std::string& manifest_ref = "");
ModelParams load_checkpoint(const std::string& path);

// Loss of one episode computed by composing the public pieces; the reference
// for the fused path below.
double episode_loss(const ModelParams& m, const Episode& ep, const LabelSet& ls);

// Fused forward/backward over one episode. Accumulates into grads and
// returns the loss.
double episode_gradient(const ModelParams& m, const Episode& ep, const LabelSet& ls,
                        ModelParams& grads);

}  // namespace promet
