#include "promet/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "promet/errors.hpp"

namespace promet {

std::vector<LabelId> nn_predict(const Matrix& support_reps,
                                const std::vector<LabelId>& support_labels,
                                const Matrix& query_reps) {
    if (support_reps.rows == 0) throw DataError("nn_predict: empty support");
    if (static_cast<int>(support_labels.size()) != support_reps.rows) {
        throw DataError("nn_predict: label count does not match support rows");
    }
    if (support_reps.cols != query_reps.cols) {
        throw DataError("nn_predict: representation widths differ");
    }
    int h = support_reps.cols;
    std::vector<LabelId> out;
    out.reserve(query_reps.rows);
    for (int q = 0; q < query_reps.rows; ++q) {
        const double* qr = query_reps.row(q);
        double best = 0.0;
        int best_idx = -1;
        for (int p = 0; p < support_reps.rows; ++p) {
            const double* pr = support_reps.row(p);
            double dist = 0.0;
            for (int c = 0; c < h; ++c) {
                double diff = qr[c] - pr[c];
                dist += diff * diff;
            }
            if (best_idx < 0 || dist < best) {
                best = dist;
                best_idx = p;
            }
        }
        out.push_back(support_labels[best_idx]);
    }
    return out;
}

namespace {

struct UnitOutcome {
    double f1 = 0.0;
    long long tp = 0, fp = 0, fn = 0;
};

// Stacks support-side representations and labels for one episode unit.
void build_support(const ModelParams& m, const std::vector<LabeledSentence>& support,
                   const LabelSet& ls, const std::vector<std::vector<std::string>>& options,
                   Matrix& reps, std::vector<LabelId>& labels) {
    int total = 0;
    for (const auto& s : support) total += static_cast<int>(s.tokens.size());
    reps = Matrix(total, m.config.hidden_dim);
    labels.clear();
    labels.reserve(total);
    int row = 0;
    for (const auto& s : support) {
        Matrix rep = represent_support(m.encoder, s, ls, options, m.config.rho, m.config.variant);
        for (int i = 0; i < rep.rows; ++i, ++row) {
            const double* src = rep.row(i);
            double* dst = reps.row(row);
            for (int c = 0; c < rep.cols; ++c) dst[c] = src[c];
            labels.push_back(s.labels[i]);
        }
    }
}

UnitOutcome evaluate_unit(const ModelParams& m, const std::vector<LabeledSentence>& support,
                          const std::vector<LabeledSentence>& query, const LabelSet& ls,
                          const std::vector<std::vector<std::string>>& options) {
    Matrix sup_reps;
    std::vector<LabelId> sup_labels;
    build_support(m, support, ls, options, sup_reps, sup_labels);

    std::vector<std::vector<Span>> gold, pred;
    gold.reserve(query.size());
    pred.reserve(query.size());
    for (const auto& s : query) {
        Matrix rep = represent_query(m.encoder, s.tokens, options, m.config.variant);
        auto labels = nn_predict(sup_reps, sup_labels, rep);
        gold.push_back(spans_from_io(s.labels));
        pred.push_back(spans_from_io(labels));
    }
    MicroF1 f1 = micro_f1(gold, pred);
    return {f1.f1, f1.tp, f1.fp, f1.fn};
}

EvalReport finalize(const std::vector<UnitOutcome>& units) {
    EvalReport report;
    long long tp = 0, fp = 0, fn = 0;
    double sum = 0.0;
    for (const auto& u : units) {
        report.per_unit_f1.push_back(u.f1);
        sum += u.f1;
        tp += u.tp;
        fp += u.fp;
        fn += u.fn;
    }
    std::size_t n = units.size();
    report.mean_f1 = n ? sum / static_cast<double>(n) : 0.0;
    double var = 0.0;
    for (const auto& u : units) {
        double d = u.f1 - report.mean_f1;
        var += d * d;
    }
    report.std_f1 = n ? std::sqrt(var / static_cast<double>(n)) : 0.0;
    MicroF1 pooled = micro_f1_from_counts(tp, fp, fn);
    report.precision = pooled.precision;
    report.recall = pooled.recall;
    report.tp = tp;
    report.fp = fp;
    report.fn = fn;
    report.pooled_f1 = pooled.f1;
    return report;
}

void run_parallel(int units, int jobs, const std::function<void(int)>& work) {
    if (jobs <= 1 || units <= 1) {
        for (int i = 0; i < units; ++i) work(i);
        return;
    }
    std::vector<std::thread> threads;
    std::atomic<int> next{0};
    int workers = std::min(jobs, units);
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            while (true) {
                int i = next.fetch_add(1);
                if (i >= units) break;
                work(i);
            }
        });
    }
    for (auto& t : threads) t.join();
}

}  // namespace

EvalReport evaluate_episodes(const ModelParams& m, const std::vector<Episode>& episodes,
                             const LabelSet& ls, int jobs) {
    std::vector<UnitOutcome> units(episodes.size());
    std::exception_ptr failure;
    std::mutex failure_mu;
    run_parallel(static_cast<int>(episodes.size()), jobs, [&](int i) {
        try {
            const Episode& ep = episodes[i];
            auto options = option_annotations(ls, ep.target_labels);
            units[i] = evaluate_unit(m, ep.support, ep.query, ls, options);
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);
    return finalize(units);
}

EvalReport evaluate_low_resource(const ModelParams& m, const Dataset& d_test, int k,
                                 const std::vector<std::uint64_t>& seeds, int jobs) {
    if (seeds.empty()) throw DataError("evaluate_low_resource: no seeds given");
    std::vector<LabelId> all_labels;
    for (LabelId id = 1; id < d_test.label_set.size(); ++id) all_labels.push_back(id);
    auto options = option_annotations(d_test.label_set, all_labels);

    std::vector<UnitOutcome> units(seeds.size());
    std::exception_ptr failure;
    std::mutex failure_mu;
    run_parallel(static_cast<int>(seeds.size()), jobs, [&](int i) {
        try {
            Rng rng(seeds[i]);
            auto [support, query] = sample_low_resource(d_test, k, rng);
            units[i] = evaluate_unit(m, support, query, d_test.label_set, options);
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);
    return finalize(units);
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["mean_f1"] = report.mean_f1;
    j["std_f1"] = report.std_f1;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["tp"] = report.tp;
    j["fp"] = report.fp;
    j["fn"] = report.fn;
    j["pooled_f1"] = report.pooled_f1;
    j["per_unit_f1"] = report.per_unit_f1;
    return j.dump(2) + "\n";
}

std::string export_embeddings(const ModelParams& m, const Episode& ep, const LabelSet& ls,
                              double keep_o_frac, std::uint64_t seed) {
    if (!(keep_o_frac >= 0.0 && keep_o_frac <= 1.0)) {
        throw DataError("export_embeddings: keep_o_frac must lie in [0,1]");
    }
    auto options = option_annotations(ls, ep.target_labels);
    Rng rng(seed);
    std::string out = "unit\tsentence\ttoken\ttext\tlabel";
    for (int c = 0; c < m.config.hidden_dim; ++c) {
        out += "\tv" + std::to_string(c);
    }
    out += '\n';

    char buf[32];
    auto append_rows = [&](const char* unit, std::size_t sentence, const LabeledSentence& s,
                           const Matrix& rep) {
        for (int i = 0; i < rep.rows; ++i) {
            if (s.labels[i] == LabelSet::kOutside && keep_o_frac < 1.0 &&
                rng.uniform() >= keep_o_frac) {
                continue;
            }
            out += unit;
            out += '\t' + std::to_string(sentence) + '\t' + std::to_string(i) + '\t' +
                   s.tokens[i] + '\t' + ls.names[s.labels[i]];
            const double* r = rep.row(i);
            for (int c = 0; c < rep.cols; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", r[c]);
                out += '\t';
                out += buf;
            }
            out += '\n';
        }
    };

    for (std::size_t si = 0; si < ep.support.size(); ++si) {
        const auto& s = ep.support[si];
        Matrix rep = represent_support(m.encoder, s, ls, options, m.config.rho, m.config.variant);
        append_rows("support", si, s, rep);
    }
    for (std::size_t si = 0; si < ep.query.size(); ++si) {
        const auto& s = ep.query[si];
        Matrix rep = represent_query(m.encoder, s.tokens, options, m.config.variant);
        append_rows("query", si, s, rep);
    }
    return out;
}

}  // namespace promet
