#include "promet/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "promet/errors.hpp"
#include "promet/rng.hpp"

namespace promet {

void validate_config(const ModelConfig& cfg) {
    if (cfg.vocab_hash_dim < 1) throw DataError("vocab_hash_dim must be >= 1");
    if (cfg.hidden_dim < 1) throw DataError("hidden_dim must be >= 1");
    if (cfg.layer_count < 1) throw DataError("layer_count must be >= 1");
    if (cfg.gauss_dim < 1) throw DataError("gauss_dim must be >= 1");
    if (!(cfg.rho > 0.0 && cfg.rho < 1.0)) throw DataError("rho must lie strictly inside (0,1)");
}

ModelParams::ModelParams(const ModelConfig& cfg)
    : config(cfg),
      encoder(cfg.vocab_hash_dim, cfg.hidden_dim, cfg.layer_count),
      heads(cfg.hidden_dim, cfg.gauss_dim) {}

ModelParams zeros_like(const ModelParams& m) { return ModelParams(m.config); }

namespace {

void fill_uniform(Matrix& m, double bound, Rng& rng) {
    for (double& v : m.data) v = rng.uniform(-bound, bound);
}

double fan_bound(int fan_in, int fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams m(cfg);
    Rng rng(seed);
    fill_uniform(m.encoder.embeddings, fan_bound(cfg.vocab_hash_dim, cfg.hidden_dim), rng);
    for (auto& layer : m.encoder.layers) {
        layer.alpha = 1.0;
        layer.beta = 0.5;
        layer.gamma = 0.5;
        fill_uniform(layer.w, fan_bound(cfg.hidden_dim, cfg.hidden_dim), rng);
    }
    fill_uniform(m.heads.w_mu, fan_bound(cfg.hidden_dim, cfg.gauss_dim), rng);
    fill_uniform(m.heads.w_var, fan_bound(cfg.hidden_dim, cfg.gauss_dim), rng);
    return m;
}

std::vector<TensorView> tensor_views(ModelParams& m) {
    std::vector<TensorView> views;
    views.push_back({"encoder.embeddings", m.encoder.embeddings.data.data(),
                     m.encoder.embeddings.data.size(), true});
    for (std::size_t l = 0; l < m.encoder.layers.size(); ++l) {
        auto& layer = m.encoder.layers[l];
        std::string base = "encoder.layer" + std::to_string(l) + ".";
        views.push_back({base + "alpha", &layer.alpha, 1, false});
        views.push_back({base + "beta", &layer.beta, 1, false});
        views.push_back({base + "gamma", &layer.gamma, 1, false});
        views.push_back({base + "mix", layer.w.data.data(), layer.w.data.size(), true});
    }
    views.push_back({"heads.w_mu", m.heads.w_mu.data.data(), m.heads.w_mu.data.size(), true});
    views.push_back({"heads.b_mu", m.heads.b_mu.data(), m.heads.b_mu.size(), false});
    views.push_back({"heads.w_var", m.heads.w_var.data.data(), m.heads.w_var.data.size(), true});
    views.push_back({"heads.b_var", m.heads.b_var.data(), m.heads.b_var.size(), false});
    return views;
}

void validate_finite(const ModelParams& m) {
    auto views = tensor_views(const_cast<ModelParams&>(m));
    for (const auto& v : views) {
        for (std::size_t i = 0; i < v.size; ++i) {
            if (!std::isfinite(v.data[i])) {
                throw NumericError("non-finite values in tensor " + v.name);
            }
        }
    }
}

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'R', 'M', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw ParseError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const ModelParams& m, const std::string& path,
                     const std::string& manifest_ref) {
    nlohmann::json header;
    header["vocab_hash_dim"] = m.config.vocab_hash_dim;
    header["hidden_dim"] = m.config.hidden_dim;
    header["layer_count"] = m.config.layer_count;
    header["gauss_dim"] = m.config.gauss_dim;
    header["rho"] = m.config.rho;
    header["variant"] = variant_name(m.config.variant);
    if (!manifest_ref.empty()) header["manifest"] = manifest_ref;
    std::string hdr = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, 4);
    write_u32(out, kCheckpointVersion);
    write_u32(out, static_cast<std::uint32_t>(hdr.size()));
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));

    auto views = tensor_views(const_cast<ModelParams&>(m));
    for (const auto& v : views) {
        write_u32(out, static_cast<std::uint32_t>(v.name.size()));
        out.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
        write_u64(out, v.size);
        out.write(reinterpret_cast<const char*>(v.data),
                  static_cast<std::streamsize>(v.size * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw ParseError("not a checkpoint file: " + path);
    }
    std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    }
    std::uint32_t hdr_len = read_u32(in);
    std::string hdr(hdr_len, '\0');
    in.read(hdr.data(), hdr_len);
    if (!in) throw ParseError("checkpoint truncated");

    ModelConfig cfg;
    try {
        auto j = nlohmann::json::parse(hdr);
        cfg.vocab_hash_dim = j.at("vocab_hash_dim").get<int>();
        cfg.hidden_dim = j.at("hidden_dim").get<int>();
        cfg.layer_count = j.at("layer_count").get<int>();
        cfg.gauss_dim = j.at("gauss_dim").get<int>();
        cfg.rho = j.at("rho").get<double>();
        cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad checkpoint header: ") + e.what());
    }

    ModelParams m(cfg);
    auto views = tensor_views(m);
    std::vector<bool> filled(views.size(), false);
    for (std::size_t r = 0; r < views.size(); ++r) {
        std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw ParseError("checkpoint truncated");
        std::uint64_t count = read_u64(in);
        std::size_t idx = views.size();
        for (std::size_t i = 0; i < views.size(); ++i) {
            if (views[i].name == name) {
                idx = i;
                break;
            }
        }
        if (idx == views.size()) throw ParseError("unknown tensor in checkpoint: " + name);
        if (filled[idx]) throw ParseError("duplicate tensor in checkpoint: " + name);
        if (count != views[idx].size) {
            throw ParseError("tensor " + name + " has " + std::to_string(count) +
                             " entries, expected " + std::to_string(views[idx].size));
        }
        in.read(reinterpret_cast<char*>(views[idx].data),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw ParseError("checkpoint truncated");
        filled[idx] = true;
    }
    in.peek();
    if (!in.eof()) throw ParseError("trailing bytes in checkpoint: " + path);
    validate_finite(m);
    return m;
}

double episode_loss(const ModelParams& m, const Episode& ep, const LabelSet& ls) {
    auto options = option_annotations(ls, ep.target_labels);
    std::vector<std::pair<GaussianEmbedding, LabelId>> support, queries;
    for (const auto& s : ep.support) {
        Matrix rep = represent_support(m.encoder, s, ls, options, m.config.rho, m.config.variant);
        for (int i = 0; i < rep.rows; ++i) {
            support.emplace_back(project(m.heads, std::span(rep.row(i), rep.cols)), s.labels[i]);
        }
    }
    for (const auto& s : ep.query) {
        Matrix rep = represent_query(m.encoder, s.tokens, options, m.config.variant);
        for (int i = 0; i < rep.rows; ++i) {
            queries.emplace_back(project(m.heads, std::span(rep.row(i), rep.cols)), s.labels[i]);
        }
    }
    return batch_loss(queries, support);
}

namespace {

// Gaussian parameters of every token of one episode side, laid out as
// token-major matrices for the pair loops.
struct TokenTable {
    Matrix mu, var, inv_var;
    Matrix d_mu, d_var;
    std::vector<ProjectTrace> ptraces;
    std::vector<LabelId> labels;
    std::vector<int> sentence;
    std::vector<int> row;

    TokenTable(int tokens, int d)
        : mu(tokens, d), var(tokens, d), inv_var(tokens, d), d_mu(tokens, d), d_var(tokens, d) {
        ptraces.resize(tokens);
        labels.resize(tokens);
        sentence.resize(tokens);
        row.resize(tokens);
    }
};

TokenTable project_side(const HeadParams& heads, const std::vector<RepTrace>& traces,
                        const std::vector<LabeledSentence>& sentences) {
    int total = 0;
    for (const auto& t : traces) total += t.rep.rows;
    TokenTable table(total, heads.gauss_dim);
    int d = heads.gauss_dim;
    int tok = 0;
    for (std::size_t s = 0; s < traces.size(); ++s) {
        const Matrix& rep = traces[s].rep;
        for (int i = 0; i < rep.rows; ++i, ++tok) {
            GaussianEmbedding g = project_traced(
                heads, std::span(rep.row(i), rep.cols), table.ptraces[tok]);
            double* mu = table.mu.row(tok);
            double* var = table.var.row(tok);
            double* inv = table.inv_var.row(tok);
            for (int j = 0; j < d; ++j) {
                mu[j] = g.mu[j];
                var[j] = g.var[j];
                inv[j] = 1.0 / g.var[j];
            }
            table.labels[tok] = sentences[s].labels[i];
            table.sentence[tok] = static_cast<int>(s);
            table.row[tok] = i;
        }
    }
    return table;
}

double pair_js(const double* qm, const double* qv, const double* qi, const double* pm,
               const double* pv, const double* pi, int d) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
        double dm = qm[j] - pm[j];
        acc += qv[j] * pi[j] + pv[j] * qi[j] + dm * dm * (pi[j] + qi[j]);
    }
    return 0.25 * (acc - 2.0 * d);
}

void pair_js_backward(double d_js, const double* qm, const double* qv, const double* qi,
                      const double* pm, const double* pv, const double* pi, double* dqm,
                      double* dqv, double* dpm, double* dpv, int d) {
    double half = 0.5 * d_js;
    double quarter = 0.25 * d_js;
    for (int j = 0; j < d; ++j) {
        double dm = qm[j] - pm[j];
        double g_mu = half * dm * (pi[j] + qi[j]);
        dqm[j] += g_mu;
        dpm[j] -= g_mu;
        dqv[j] += quarter * (pi[j] - pv[j] * qi[j] * qi[j] - dm * dm * qi[j] * qi[j]);
        dpv[j] += quarter * (qi[j] - qv[j] * pi[j] * pi[j] - dm * dm * pi[j] * pi[j]);
    }
}

void backprop_side(const HeadParams& heads, TokenTable& table, std::vector<RepTrace>& traces,
                   ModelParams& grads, const EncoderParams& enc, double rho) {
    int d = heads.gauss_dim;
    std::vector<Matrix> d_reps;
    d_reps.reserve(traces.size());
    for (const auto& t : traces) d_reps.emplace_back(t.rep.rows, t.rep.cols);
    int total = static_cast<int>(table.labels.size());
    for (int tok = 0; tok < total; ++tok) {
        const Matrix& rep = traces[table.sentence[tok]].rep;
        int row = table.row[tok];
        project_backward(heads, std::span(rep.row(row), rep.cols), table.ptraces[tok],
                         std::span(table.d_mu.row(tok), d), std::span(table.d_var.row(tok), d),
                         grads.heads,
                         std::span(d_reps[table.sentence[tok]].row(row), rep.cols));
    }
    for (std::size_t s = 0; s < traces.size(); ++s) {
        represent_backward(enc, traces[s], rho, d_reps[s], grads.encoder);
    }
}

}  // namespace

double episode_gradient(const ModelParams& m, const Episode& ep, const LabelSet& ls,
                        ModelParams& grads) {
    auto options = option_annotations(ls, ep.target_labels);
    double rho = m.config.rho;
    PromptVariant variant = m.config.variant;

    std::vector<RepTrace> sup_traces, qry_traces;
    sup_traces.reserve(ep.support.size());
    for (const auto& s : ep.support) {
        sup_traces.push_back(represent_support_traced(m.encoder, s, ls, options, rho, variant));
    }
    qry_traces.reserve(ep.query.size());
    for (const auto& s : ep.query) {
        qry_traces.push_back(represent_query_traced(m.encoder, s.tokens, options, variant));
    }

    TokenTable sup = project_side(m.heads, sup_traces, ep.support);
    TokenTable qry = project_side(m.heads, qry_traces, ep.query);
    int p_count = static_cast<int>(sup.labels.size());
    int q_count = static_cast<int>(qry.labels.size());
    if (p_count == 0) throw DataError("episode_gradient: empty support");
    int d = m.heads.gauss_dim;

    Matrix sim(q_count, p_count);
    std::vector<double> pos_sum(q_count, 0.0), all_sum(q_count, 0.0);
    std::vector<int> pos_count(q_count, 0);
    for (int q = 0; q < q_count; ++q) {
        const double* qm = qry.mu.row(q);
        const double* qv = qry.var.row(q);
        const double* qi = qry.inv_var.row(q);
        double* srow = sim.row(q);
        for (int p = 0; p < p_count; ++p) {
            double js = pair_js(qm, qv, qi, sup.mu.row(p), sup.var.row(p), sup.inv_var.row(p), d);
            // Same underflow floor as similarity(): keeps the ratios defined.
            double s = std::fmax(std::exp(-js), std::numeric_limits<double>::min());
            srow[p] = s;
            all_sum[q] += s;
            if (sup.labels[p] == qry.labels[q]) {
                pos_sum[q] += s;
                ++pos_count[q];
            }
        }
    }

    int counted = 0;
    double loss_acc = 0.0;
    for (int q = 0; q < q_count; ++q) {
        if (pos_count[q] == 0) continue;
        ++counted;
        loss_acc += -std::log(pos_sum[q] / pos_count[q] / all_sum[q]);
    }
    if (counted == 0) throw DataError("batch_loss: no contrastable tokens");
    double loss = loss_acc / counted;
    if (!std::isfinite(loss)) throw NumericError("episode loss is non-finite");

    double inv_counted = 1.0 / counted;
    for (int q = 0; q < q_count; ++q) {
        if (pos_count[q] == 0) continue;
        const double* qm = qry.mu.row(q);
        const double* qv = qry.var.row(q);
        const double* qi = qry.inv_var.row(q);
        double* dqm = qry.d_mu.row(q);
        double* dqv = qry.d_var.row(q);
        const double* srow = sim.row(q);
        double inv_all = 1.0 / all_sum[q];
        double inv_pos = 1.0 / pos_sum[q];
        for (int p = 0; p < p_count; ++p) {
            bool match = sup.labels[p] == qry.labels[q];
            double d_s = (inv_all - (match ? inv_pos : 0.0)) * inv_counted;
            double d_js = -srow[p] * d_s;
            if (d_js == 0.0) continue;
            pair_js_backward(d_js, qm, qv, qi, sup.mu.row(p), sup.var.row(p), sup.inv_var.row(p),
                             dqm, dqv, sup.d_mu.row(p), sup.d_var.row(p), d);
        }
    }

    backprop_side(m.heads, sup, sup_traces, grads, m.encoder, rho);
    backprop_side(m.heads, qry, qry_traces, grads, m.encoder, rho);
    return loss;
}

}  // namespace promet
