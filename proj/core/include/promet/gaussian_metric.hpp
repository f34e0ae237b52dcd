#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "promet/corpus.hpp"
#include "promet/matrix.hpp"

namespace promet {

// Lower bound added to every projected variance so KL terms stay finite.
inline constexpr double kVarianceFloor = 1e-6;

// Diagonal Gaussian over the metric space: one mean and one variance per
// coordinate.
struct GaussianEmbedding {
    std::vector<double> mu;
    std::vector<double> var;
};

// Two linear heads mapping an encoder row to Gaussian parameters. The
// variance head output passes through softplus and the floor.
struct HeadParams {
    int input_dim = 0;
    int gauss_dim = 0;
    Matrix w_mu;
    Matrix w_var;
    std::vector<double> b_mu;
    std::vector<double> b_var;

    HeadParams(int input_dim, int gauss_dim);
};

HeadParams zeros_like(const HeadParams& p);

GaussianEmbedding project(const HeadParams& hp, std::span<const double> h);

// Sigmoid of the variance pre-activation, kept for the backward pass.
struct ProjectTrace {
    std::vector<double> sig_var;
};

GaussianEmbedding project_traced(const HeadParams& hp, std::span<const double> h,
                                 ProjectTrace& trace);

// Accumulates head gradients and the gradient w.r.t. the input row given
// d(scalar)/d(mu) and d(scalar)/d(var).
void project_backward(const HeadParams& hp, std::span<const double> h, const ProjectTrace& trace,
                      std::span<const double> d_mu, std::span<const double> d_var,
                      HeadParams& grads, std::span<double> d_h);

// KL divergence between diagonal Gaussians, closed form.
double kl(const GaussianEmbedding& g0, const GaussianEmbedding& g1);

// Symmetrized KL: 0.5 * (kl(g0,g1) + kl(g1,g0)).
double js_distance(const GaussianEmbedding& g0, const GaussianEmbedding& g1);

// Accumulates d(scalar)/d(g0) and d(scalar)/d(g1) given d(scalar)/d(js).
void js_distance_backward(const GaussianEmbedding& g0, const GaussianEmbedding& g1, double d_js,
                          GaussianEmbedding& d_g0, GaussianEmbedding& d_g1);

// exp(-js_distance), in (0, 1].
double similarity(const GaussianEmbedding& g0, const GaussianEmbedding& g1);

// Contrastive loss for one query token against the support tokens. Tokens
// whose label matches q_label (O included) form the positive set; when that
// set is empty the token is skipped and nullopt returned.
std::optional<double> token_loss(
    const GaussianEmbedding& q, LabelId q_label,
    const std::vector<std::pair<GaussianEmbedding, LabelId>>& support);

// Mean of the non-skipped token losses. Throws when every token is skipped.
double batch_loss(const std::vector<std::pair<GaussianEmbedding, LabelId>>& queries,
                  const std::vector<std::pair<GaussianEmbedding, LabelId>>& support);

}  // namespace promet
