#include "promet/span_metrics.hpp"

#include <algorithm>

#include "promet/errors.hpp"

namespace promet {

std::vector<Span> spans_from_io(const std::vector<LabelId>& labels) {
    std::vector<Span> spans;
    std::size_t i = 0;
    while (i < labels.size()) {
        if (labels[i] == LabelSet::kOutside) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < labels.size() && labels[j] == labels[i]) ++j;
        spans.push_back({static_cast<int>(i), static_cast<int>(j), labels[i]});
        i = j;
    }
    return spans;
}

MicroF1 micro_f1_from_counts(long long tp, long long fp, long long fn) {
    MicroF1 m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

MicroF1 micro_f1(const std::vector<std::vector<Span>>& gold,
                 const std::vector<std::vector<Span>>& pred) {
    if (gold.size() != pred.size()) {
        throw DataError("micro_f1: gold and pred sentence counts differ");
    }
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t s = 0; s < gold.size(); ++s) {
        for (const auto& p : pred[s]) {
            if (std::find(gold[s].begin(), gold[s].end(), p) != gold[s].end()) {
                ++tp;
            } else {
                ++fp;
            }
        }
        for (const auto& g : gold[s]) {
            if (std::find(pred[s].begin(), pred[s].end(), g) == pred[s].end()) ++fn;
        }
    }
    return micro_f1_from_counts(tp, fp, fn);
}

}  // namespace promet
