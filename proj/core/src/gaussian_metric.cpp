#include "promet/gaussian_metric.hpp"

#include <cmath>
#include <limits>

#include "promet/errors.hpp"

namespace promet {

namespace {

double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

void check_same_dim(const GaussianEmbedding& g0, const GaussianEmbedding& g1) {
    if (g0.mu.size() != g1.mu.size() || g0.var.size() != g1.var.size() ||
        g0.mu.size() != g0.var.size()) {
        throw DataError("gaussian dimension mismatch");
    }
}

}  // namespace

HeadParams::HeadParams(int input_dim, int gauss_dim)
    : input_dim(input_dim),
      gauss_dim(gauss_dim),
      w_mu(input_dim, gauss_dim),
      w_var(input_dim, gauss_dim),
      b_mu(gauss_dim, 0.0),
      b_var(gauss_dim, 0.0) {
    if (input_dim < 1 || gauss_dim < 1) throw DataError("head dimensions must be >= 1");
}

HeadParams zeros_like(const HeadParams& p) { return HeadParams(p.input_dim, p.gauss_dim); }

GaussianEmbedding project_traced(const HeadParams& hp, std::span<const double> h,
                                 ProjectTrace& trace) {
    if (static_cast<int>(h.size()) != hp.input_dim) {
        throw DataError("project: input width does not match head input_dim");
    }
    for (double v : h) {
        if (!std::isfinite(v)) throw NumericError("project: non-finite input");
    }
    int d = hp.gauss_dim;
    GaussianEmbedding g;
    g.mu.assign(d, 0.0);
    g.var.assign(d, 0.0);
    trace.sig_var.assign(d, 0.0);
    for (int i = 0; i < hp.input_dim; ++i) {
        double x = h[i];
        const double* wm = hp.w_mu.row(i);
        const double* wv = hp.w_var.row(i);
        for (int j = 0; j < d; ++j) {
            g.mu[j] += x * wm[j];
            g.var[j] += x * wv[j];
        }
    }
    for (int j = 0; j < d; ++j) {
        g.mu[j] += hp.b_mu[j];
        double z = g.var[j] + hp.b_var[j];
        trace.sig_var[j] = sigmoid(z);
        g.var[j] = softplus(z) + kVarianceFloor;
    }
    return g;
}

GaussianEmbedding project(const HeadParams& hp, std::span<const double> h) {
    ProjectTrace trace;
    return project_traced(hp, h, trace);
}

void project_backward(const HeadParams& hp, std::span<const double> h, const ProjectTrace& trace,
                      std::span<const double> d_mu, std::span<const double> d_var,
                      HeadParams& grads, std::span<double> d_h) {
    int d = hp.gauss_dim;
    if (static_cast<int>(h.size()) != hp.input_dim ||
        static_cast<int>(d_mu.size()) != d || static_cast<int>(d_var.size()) != d ||
        static_cast<int>(d_h.size()) != hp.input_dim) {
        throw DataError("project_backward: shape mismatch");
    }
    std::vector<double> dz(d);
    for (int j = 0; j < d; ++j) {
        dz[j] = d_var[j] * trace.sig_var[j];
        grads.b_mu[j] += d_mu[j];
        grads.b_var[j] += dz[j];
    }
    for (int i = 0; i < hp.input_dim; ++i) {
        double x = h[i];
        double* gm = grads.w_mu.row(i);
        double* gv = grads.w_var.row(i);
        const double* wm = hp.w_mu.row(i);
        const double* wv = hp.w_var.row(i);
        double acc = 0.0;
        for (int j = 0; j < d; ++j) {
            gm[j] += x * d_mu[j];
            gv[j] += x * dz[j];
            acc += wm[j] * d_mu[j] + wv[j] * dz[j];
        }
        d_h[i] += acc;
    }
}

double kl(const GaussianEmbedding& g0, const GaussianEmbedding& g1) {
    check_same_dim(g0, g1);
    double acc = 0.0;
    for (std::size_t j = 0; j < g0.mu.size(); ++j) {
        double dm = g1.mu[j] - g0.mu[j];
        acc += g0.var[j] / g1.var[j] + dm * dm / g1.var[j] - 1.0 +
               std::log(g1.var[j] / g0.var[j]);
    }
    return 0.5 * acc;
}

double js_distance(const GaussianEmbedding& g0, const GaussianEmbedding& g1) {
    return 0.5 * (kl(g0, g1) + kl(g1, g0));
}

void js_distance_backward(const GaussianEmbedding& g0, const GaussianEmbedding& g1, double d_js,
                          GaussianEmbedding& d_g0, GaussianEmbedding& d_g1) {
    check_same_dim(g0, g1);
    check_same_dim(d_g0, d_g1);
    if (d_g0.mu.size() != g0.mu.size()) throw DataError("js_distance_backward: shape mismatch");
    for (std::size_t j = 0; j < g0.mu.size(); ++j) {
        double dm = g0.mu[j] - g1.mu[j];
        double v0 = g0.var[j];
        double v1 = g1.var[j];
        double inv0 = 1.0 / v0;
        double inv1 = 1.0 / v1;
        double mu_g = 0.5 * dm * (inv0 + inv1);
        d_g0.mu[j] += d_js * mu_g;
        d_g1.mu[j] -= d_js * mu_g;
        d_g0.var[j] += d_js * 0.25 * (inv1 - v1 * inv0 * inv0 - dm * dm * inv0 * inv0);
        d_g1.var[j] += d_js * 0.25 * (inv0 - v0 * inv1 * inv1 - dm * dm * inv1 * inv1);
    }
}

double similarity(const GaussianEmbedding& g0, const GaussianEmbedding& g1) {
    // exp underflows to 0 past distances of ~745; the floor keeps the
    // documented (0,1] range and the loss ratios well defined.
    return std::fmax(std::exp(-js_distance(g0, g1)), std::numeric_limits<double>::min());
}

std::optional<double> token_loss(
    const GaussianEmbedding& q, LabelId q_label,
    const std::vector<std::pair<GaussianEmbedding, LabelId>>& support) {
    if (support.empty()) throw DataError("token_loss: empty support");
    double pos_sum = 0.0;
    double all_sum = 0.0;
    int pos_count = 0;
    for (const auto& [g, label] : support) {
        double s = similarity(q, g);
        all_sum += s;
        if (label == q_label) {
            pos_sum += s;
            ++pos_count;
        }
    }
    if (pos_count == 0) return std::nullopt;
    return -std::log(pos_sum / pos_count / all_sum);
}

double batch_loss(const std::vector<std::pair<GaussianEmbedding, LabelId>>& queries,
                  const std::vector<std::pair<GaussianEmbedding, LabelId>>& support) {
    double acc = 0.0;
    int counted = 0;
    for (const auto& [g, label] : queries) {
        if (auto loss = token_loss(g, label, support)) {
            acc += *loss;
            ++counted;
        }
    }
    if (counted == 0) throw DataError("batch_loss: no contrastable tokens");
    return acc / counted;
}

}  // namespace promet
