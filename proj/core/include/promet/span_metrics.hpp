#pragma once

#include <vector>

#include "promet/corpus.hpp"

namespace promet {

// Entity mention under IO tagging: a maximal run of one non-O label.
// end is exclusive.
struct Span {
    int start = 0;
    int end = 0;
    LabelId label = 0;

    bool operator==(const Span&) const = default;
};

std::vector<Span> spans_from_io(const std::vector<LabelId>& labels);

struct MicroF1 {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Entity-level micro-F1 by exact (start, end, label) match, pooled over
// sentences. gold and pred are parallel per-sentence span lists.
MicroF1 micro_f1(const std::vector<std::vector<Span>>& gold,
                 const std::vector<std::vector<Span>>& pred);

MicroF1 micro_f1_from_counts(long long tp, long long fp, long long fn);

}  // namespace promet
