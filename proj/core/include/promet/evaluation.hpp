#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promet/episodes.hpp"
#include "promet/model.hpp"
#include "promet/span_metrics.hpp"

namespace promet {

// Label of the support row nearest in squared Euclidean distance, per query
// row. Ties go to the lowest support index.
std::vector<LabelId> nn_predict(const Matrix& support_reps,
                                const std::vector<LabelId>& support_labels,
                                const Matrix& query_reps);

struct EvalReport {
    std::vector<double> per_unit_f1;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;  // population std over units
    double precision = 0.0;
    double recall = 0.0;
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double pooled_f1 = 0.0;  // from counts pooled over units
};

// Entity-level micro-F1 per episode, averaged over episodes. Episodes are
// processed in parallel across jobs threads; aggregation order is fixed.
EvalReport evaluate_episodes(const ModelParams& m, const std::vector<Episode>& episodes,
                             const LabelSet& ls, int jobs = 1);

// One unit per seed: sample a support over the full label set, predict every
// remaining sentence.
EvalReport evaluate_low_resource(const ModelParams& m, const Dataset& d_test, int k,
                                 const std::vector<std::uint64_t>& seeds, int jobs = 1);

std::string report_to_json(const EvalReport& report);

// Tab-separated table of fused representations with gold labels for the
// episode's support and query tokens. keep_o_frac < 1 downsamples non-entity
// tokens with the given seed. Values are printed with round-trip precision.
std::string export_embeddings(const ModelParams& m, const Episode& ep, const LabelSet& ls,
                              double keep_o_frac = 1.0, std::uint64_t seed = 0);

}  // namespace promet
