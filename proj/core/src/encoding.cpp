#include "promet/encoding.hpp"

#include <cmath>

#include "promet/errors.hpp"
#include "promet/rng.hpp"

namespace promet {

const char* variant_name(PromptVariant v) {
    switch (v) {
        case PromptVariant::plain: return "plain";
        case PromptVariant::option_only: return "option";
        case PromptVariant::label_only: return "label";
        case PromptVariant::plain_label: return "plain+label";
        case PromptVariant::option_label: return "option+label";
    }
    throw DataError("unknown prompt variant");
}

PromptVariant variant_from_string(const std::string& s) {
    if (s == "plain") return PromptVariant::plain;
    if (s == "option" || s == "A") return PromptVariant::option_only;
    if (s == "label" || s == "B") return PromptVariant::label_only;
    if (s == "plain+label" || s == "plain+B") return PromptVariant::plain_label;
    if (s == "option+label" || s == "A+B") return PromptVariant::option_label;
    throw DataError("unknown prompt variant: " + s);
}

bool variant_fuses(PromptVariant v) {
    return v == PromptVariant::plain_label || v == PromptVariant::option_label;
}

bool query_uses_options(PromptVariant v) {
    return v == PromptVariant::option_only || v == PromptVariant::label_only ||
           v == PromptVariant::option_label;
}

EncoderParams::EncoderParams(int vocab_hash_dim, int hidden_dim, int layer_count)
    : vocab_hash_dim(vocab_hash_dim),
      hidden_dim(hidden_dim),
      embeddings(vocab_hash_dim, hidden_dim) {
    if (vocab_hash_dim < 1) throw DataError("encoder vocab_hash_dim must be >= 1");
    if (hidden_dim < 1) throw DataError("encoder hidden_dim must be >= 1");
    if (layer_count < 0) throw DataError("encoder layer count must be >= 0");
    layers.reserve(layer_count);
    for (int l = 0; l < layer_count; ++l) layers.emplace_back(hidden_dim);
}

EncoderParams zeros_like(const EncoderParams& p) {
    return EncoderParams(p.vocab_hash_dim, p.hidden_dim, static_cast<int>(p.layers.size()));
}

std::size_t hash_bucket(std::string_view token, int vocab_hash_dim) {
    return static_cast<std::size_t>(fnv1a64(token) %
                                    static_cast<std::uint64_t>(vocab_hash_dim));
}

namespace {

void check_gates_finite(const EncoderParams& p) {
    for (const auto& layer : p.layers) {
        if (!std::isfinite(layer.alpha) || !std::isfinite(layer.beta) ||
            !std::isfinite(layer.gamma)) {
            throw NumericError("non-finite encoder gate parameter");
        }
    }
}

// win[i] = mean of in rows over {i-1, i, i+1} clipped to the sequence.
Matrix window_means(const Matrix& in) {
    Matrix win(in.rows, in.cols);
    for (int i = 0; i < in.rows; ++i) {
        int lo = i > 0 ? i - 1 : 0;
        int hi = i + 1 < in.rows ? i + 1 : in.rows - 1;
        double inv_n = 1.0 / static_cast<double>(hi - lo + 1);
        double* w = win.row(i);
        for (int j = lo; j <= hi; ++j) {
            const double* r = in.row(j);
            for (int c = 0; c < in.cols; ++c) w[c] += r[c];
        }
        for (int c = 0; c < in.cols; ++c) w[c] *= inv_n;
    }
    return win;
}

void apply_layer(const MixLayer& layer, const Matrix& in, Matrix& out, Matrix& tanh_z) {
    int h = in.cols;
    Matrix win = window_means(in);
    for (int i = 0; i < in.rows; ++i) {
        const double* x = in.row(i);
        const double* wn = win.row(i);
        double* t = tanh_z.row(i);
        double* o = out.row(i);
        for (int a = 0; a < h; ++a) {
            double z = 0.0;
            const double* wrow = layer.w.row(a);
            for (int b = 0; b < h; ++b) z += wrow[b] * x[b];
            t[a] = std::tanh(z);
            o[a] = layer.alpha * x[a] + layer.beta * wn[a] + layer.gamma * t[a];
        }
    }
}

Matrix average_tail(const std::vector<Matrix>& stages) {
    int m = std::min<int>(4, static_cast<int>(stages.size()));
    Matrix out(stages[0].rows, stages[0].cols);
    double inv_m = 1.0 / m;
    for (std::size_t s = stages.size() - m; s < stages.size(); ++s) {
        for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += stages[s].data[k];
    }
    for (double& v : out.data) v *= inv_m;
    return out;
}

}  // namespace

Matrix encode_traced(const EncoderParams& p, const PromptedSequence& seq, EncodeTrace& trace) {
    if (seq.tokens.empty()) throw DataError("encode: empty sequence");
    if (p.embeddings.rows != p.vocab_hash_dim || p.embeddings.cols != p.hidden_dim) {
        throw DataError("encode: embedding table shape mismatch");
    }
    check_gates_finite(p);

    int t_len = static_cast<int>(seq.tokens.size());
    int h = p.hidden_dim;
    trace.buckets.clear();
    trace.stages.clear();
    trace.tanh_z.clear();

    Matrix stage(t_len, h);
    for (int i = 0; i < t_len; ++i) {
        std::size_t bucket = hash_bucket(seq.tokens[i], p.vocab_hash_dim);
        trace.buckets.push_back(bucket);
        const double* e = p.embeddings.row(static_cast<int>(bucket));
        double* r = stage.row(i);
        for (int c = 0; c < h; ++c) r[c] = e[c];
    }
    trace.stages.push_back(stage);

    for (const auto& layer : p.layers) {
        if (layer.w.rows != h || layer.w.cols != h) {
            throw DataError("encode: mixing matrix shape mismatch");
        }
        Matrix next(t_len, h);
        Matrix tanh_z(t_len, h);
        apply_layer(layer, trace.stages.back(), next, tanh_z);
        trace.tanh_z.push_back(std::move(tanh_z));
        trace.stages.push_back(std::move(next));
    }

    Matrix out = average_tail(trace.stages);
    if (!all_finite(out)) throw NumericError("encode produced non-finite output");
    return out;
}

Matrix encode(const EncoderParams& p, const PromptedSequence& seq) {
    EncodeTrace trace;
    return encode_traced(p, seq, trace);
}

void encode_backward(const EncoderParams& p, const EncodeTrace& trace, const Matrix& d_out,
                     EncoderParams& grads) {
    int levels = static_cast<int>(trace.stages.size());
    int layer_count = levels - 1;
    int t_len = trace.stages[0].rows;
    int h = p.hidden_dim;
    if (d_out.rows != t_len || d_out.cols != h) {
        throw DataError("encode_backward: gradient shape mismatch");
    }

    int m = std::min(4, levels);
    double inv_m = 1.0 / m;
    std::vector<Matrix> g;
    g.reserve(levels);
    for (int l = 0; l < levels; ++l) g.emplace_back(t_len, h);
    for (int l = levels - m; l < levels; ++l) {
        for (std::size_t k = 0; k < g[l].data.size(); ++k) {
            g[l].data[k] += d_out.data[k] * inv_m;
        }
    }

    for (int l = layer_count - 1; l >= 0; --l) {
        const auto& layer = p.layers[l];
        auto& lg = grads.layers[l];
        const Matrix& in = trace.stages[l];
        const Matrix& tz = trace.tanh_z[l];
        const Matrix& gout = g[l + 1];
        Matrix win = window_means(in);
        Matrix dz(t_len, h);

        for (int i = 0; i < t_len; ++i) {
            const double* go = gout.row(i);
            const double* x = in.row(i);
            const double* wn = win.row(i);
            const double* t = tz.row(i);
            double* dzi = dz.row(i);
            for (int a = 0; a < h; ++a) {
                lg.alpha += go[a] * x[a];
                lg.beta += go[a] * wn[a];
                lg.gamma += go[a] * t[a];
                dzi[a] = layer.gamma * go[a] * (1.0 - t[a] * t[a]);
            }
        }
        for (int i = 0; i < t_len; ++i) {
            const double* dzi = dz.row(i);
            const double* x = in.row(i);
            for (int a = 0; a < h; ++a) {
                double* wrow = lg.w.row(a);
                double d = dzi[a];
                for (int b = 0; b < h; ++b) wrow[b] += d * x[b];
            }
        }
        Matrix& gin = g[l];
        for (int i = 0; i < t_len; ++i) {
            const double* go = gout.row(i);
            double* gi = gin.row(i);
            for (int a = 0; a < h; ++a) gi[a] += layer.alpha * go[a];

            int lo = i > 0 ? i - 1 : 0;
            int hi = i + 1 < t_len ? i + 1 : t_len - 1;
            double scale = layer.beta / static_cast<double>(hi - lo + 1);
            for (int j = lo; j <= hi; ++j) {
                double* gj = gin.row(j);
                for (int a = 0; a < h; ++a) gj[a] += scale * go[a];
            }

            const double* dzi = dz.row(i);
            for (int a = 0; a < h; ++a) {
                const double* wrow = layer.w.row(a);
                double d = dzi[a];
                for (int b = 0; b < h; ++b) gi[b] += wrow[b] * d;
            }
        }
    }

    for (int i = 0; i < t_len; ++i) {
        double* e = grads.embeddings.row(static_cast<int>(trace.buckets[i]));
        const double* gi = g[0].row(i);
        for (int c = 0; c < h; ++c) e[c] += gi[c];
    }
}

Matrix extract_masked(const Matrix& r, const std::vector<int>& mask) {
    if (static_cast<int>(mask.size()) != r.rows) {
        throw DataError("extract_masked: mask length does not match row count");
    }
    int kept = 0;
    for (int m : mask) kept += m != 0;
    if (kept == 0) throw DataError("extract_masked: mask selects no rows");
    Matrix out(kept, r.cols);
    int o = 0;
    for (int i = 0; i < r.rows; ++i) {
        if (!mask[i]) continue;
        const double* src = r.row(i);
        double* dst = out.row(o++);
        for (int c = 0; c < r.cols; ++c) dst[c] = src[c];
    }
    return out;
}

void extract_masked_backward(const Matrix& d_extracted, const std::vector<int>& mask,
                             Matrix& d_full) {
    if (static_cast<int>(mask.size()) != d_full.rows || d_extracted.cols != d_full.cols) {
        throw DataError("extract_masked_backward: shape mismatch");
    }
    int o = 0;
    for (int i = 0; i < d_full.rows; ++i) {
        if (!mask[i]) continue;
        const double* src = d_extracted.row(o++);
        double* dst = d_full.row(i);
        for (int c = 0; c < d_full.cols; ++c) dst[c] += src[c];
    }
    if (o != d_extracted.rows) throw DataError("extract_masked_backward: row count mismatch");
}

Matrix fuse(const Matrix& ha, const Matrix& hb, double rho) {
    if (!ha.same_shape(hb)) throw DataError("fuse: shape mismatch");
    if (!(rho > 0.0 && rho < 1.0)) {
        throw DataError("fuse: rho must lie strictly inside (0,1)");
    }
    Matrix out(ha.rows, ha.cols);
    for (std::size_t k = 0; k < out.data.size(); ++k) {
        out.data[k] = rho * ha.data[k] + (1.0 - rho) * hb.data[k];
    }
    return out;
}

namespace {

PromptedSequence primary_prompt(const std::vector<std::string>& x,
                                const std::vector<std::vector<std::string>>& options,
                                PromptVariant variant, bool for_query) {
    if (for_query ? query_uses_options(variant)
                  : (variant == PromptVariant::option_only ||
                     variant == PromptVariant::option_label)) {
        return option_prefix(x, options);
    }
    return identity_prompt(x);
}

}  // namespace

RepTrace represent_support_traced(const EncoderParams& p, const LabeledSentence& s,
                                  const LabelSet& ls,
                                  const std::vector<std::vector<std::string>>& options, double rho,
                                  PromptVariant variant) {
    RepTrace t;
    if (variant == PromptVariant::label_only) {
        t.primary = label_aware(s.tokens, s.labels, ls);
    } else {
        t.primary = primary_prompt(s.tokens, options, variant, false);
    }
    Matrix primary_rep = extract_masked(encode_traced(p, t.primary, t.primary_trace),
                                        t.primary.mask);
    if (variant_fuses(variant)) {
        t.fused = true;
        t.secondary = label_aware(s.tokens, s.labels, ls);
        Matrix secondary_rep = extract_masked(encode_traced(p, t.secondary, t.secondary_trace),
                                              t.secondary.mask);
        t.rep = fuse(primary_rep, secondary_rep, rho);
    } else {
        t.rep = std::move(primary_rep);
    }
    return t;
}

RepTrace represent_query_traced(const EncoderParams& p, const std::vector<std::string>& x,
                                const std::vector<std::vector<std::string>>& options,
                                PromptVariant variant) {
    RepTrace t;
    t.primary = primary_prompt(x, options, variant, true);
    t.rep = extract_masked(encode_traced(p, t.primary, t.primary_trace), t.primary.mask);
    return t;
}

Matrix represent_support(const EncoderParams& p, const LabeledSentence& s, const LabelSet& ls,
                         const std::vector<std::vector<std::string>>& options, double rho,
                         PromptVariant variant) {
    return represent_support_traced(p, s, ls, options, rho, variant).rep;
}

Matrix represent_query(const EncoderParams& p, const std::vector<std::string>& x,
                       const std::vector<std::vector<std::string>>& options,
                       PromptVariant variant) {
    return represent_query_traced(p, x, options, variant).rep;
}

void represent_backward(const EncoderParams& p, const RepTrace& trace, double rho,
                        const Matrix& d_rep, EncoderParams& grads) {
    int h = p.hidden_dim;
    Matrix d_primary_full(static_cast<int>(trace.primary.tokens.size()), h);
    if (trace.fused) {
        Matrix d_branch(d_rep.rows, d_rep.cols);
        for (std::size_t k = 0; k < d_rep.data.size(); ++k) {
            d_branch.data[k] = rho * d_rep.data[k];
        }
        extract_masked_backward(d_branch, trace.primary.mask, d_primary_full);
        encode_backward(p, trace.primary_trace, d_primary_full, grads);

        Matrix d_secondary_full(static_cast<int>(trace.secondary.tokens.size()), h);
        for (std::size_t k = 0; k < d_rep.data.size(); ++k) {
            d_branch.data[k] = (1.0 - rho) * d_rep.data[k];
        }
        extract_masked_backward(d_branch, trace.secondary.mask, d_secondary_full);
        encode_backward(p, trace.secondary_trace, d_secondary_full, grads);
    } else {
        extract_masked_backward(d_rep, trace.primary.mask, d_primary_full);
        encode_backward(p, trace.primary_trace, d_primary_full, grads);
    }
}

}  // namespace promet
