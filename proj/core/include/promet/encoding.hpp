#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promet/corpus.hpp"
#include "promet/matrix.hpp"
#include "promet/prompting.hpp"

namespace promet {

// Which prompts feed the support representation. Variants with two prompts
// fuse them with weight rho; single-prompt variants bypass fusion.
enum class PromptVariant {
    plain,         // original sentence only
    option_only,   // option-prefix prompt only
    label_only,    // label-aware prompt only
    plain_label,   // plain fused with label-aware
    option_label,  // option-prefix fused with label-aware
};

const char* variant_name(PromptVariant v);
// Accepts the canonical names plus the short aliases "A", "B", "plain+B",
// "A+B" used in ablation grids.
PromptVariant variant_from_string(const std::string& s);
bool variant_fuses(PromptVariant v);
// True when the query side uses the option-prefix prompt; plain variants
// encode the query unprompted.
bool query_uses_options(PromptVariant v);

struct MixLayer {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    Matrix w;

    explicit MixLayer(int hidden_dim) : w(hidden_dim, hidden_dim) {}
};

// Word-level encoder: hash-bucketed embeddings followed by gated local-mixing
// layers. Layer l maps row i to
//   alpha*in[i] + beta*mean(in over {i-1,i,i+1} clipped) + gamma*tanh(W*in[i])
// and the output is the elementwise average of the last min(4, L+1) stages.
struct EncoderParams {
    int vocab_hash_dim = 0;
    int hidden_dim = 0;
    Matrix embeddings;
    std::vector<MixLayer> layers;

    EncoderParams(int vocab_hash_dim, int hidden_dim, int layer_count);
};

EncoderParams zeros_like(const EncoderParams& p);

std::size_t hash_bucket(std::string_view token, int vocab_hash_dim);

Matrix encode(const EncoderParams& p, const PromptedSequence& seq);

// Per-stage activations kept for the backward pass.
struct EncodeTrace {
    std::vector<std::size_t> buckets;
    std::vector<Matrix> stages;
    std::vector<Matrix> tanh_z;
};

Matrix encode_traced(const EncoderParams& p, const PromptedSequence& seq, EncodeTrace& trace);

// Accumulates d(scalar)/d(params) into grads given d(scalar)/d(output).
void encode_backward(const EncoderParams& p, const EncodeTrace& trace, const Matrix& d_out,
                     EncoderParams& grads);

Matrix extract_masked(const Matrix& r, const std::vector<int>& mask);

// Scatters rows of d_extracted back to the mask-1 positions of d_full,
// accumulating.
void extract_masked_backward(const Matrix& d_extracted, const std::vector<int>& mask,
                             Matrix& d_full);

Matrix fuse(const Matrix& ha, const Matrix& hb, double rho);

// Fused support representation for the sentence under the given variant.
// Row count equals the sentence length.
Matrix represent_support(const EncoderParams& p, const LabeledSentence& s, const LabelSet& ls,
                         const std::vector<std::vector<std::string>>& options, double rho,
                         PromptVariant variant);

// Query-side representation: option-prefix prompt for option variants,
// unprompted otherwise. Never uses labels.
Matrix represent_query(const EncoderParams& p, const std::vector<std::string>& x,
                       const std::vector<std::vector<std::string>>& options,
                       PromptVariant variant);

// Forward pass that keeps everything the backward pass needs.
struct RepTrace {
    PromptedSequence primary;
    EncodeTrace primary_trace;
    bool fused = false;
    PromptedSequence secondary;
    EncodeTrace secondary_trace;
    Matrix rep;
};

RepTrace represent_support_traced(const EncoderParams& p, const LabeledSentence& s,
                                  const LabelSet& ls,
                                  const std::vector<std::vector<std::string>>& options, double rho,
                                  PromptVariant variant);

RepTrace represent_query_traced(const EncoderParams& p, const std::vector<std::string>& x,
                                const std::vector<std::vector<std::string>>& options,
                                PromptVariant variant);

void represent_backward(const EncoderParams& p, const RepTrace& trace, double rho,
                        const Matrix& d_rep, EncoderParams& grads);

}  // namespace promet
