#pragma once

#include <cstdint>

#include "promet/corpus.hpp"

namespace promet {

// Generator for a labeled corpus whose entity tokens carry their type on the
// surface: every entity word is its label's stem plus a suffix, so mentions
// of one type share a stem with the type annotation.
struct SyntheticConfig {
    int sentences = 2000;
    int entity_types = 8;
    int suffixes_per_type = 24;
    int filler_words = 60;
    int min_sentence_len = 6;
    int max_sentence_len = 10;
    int min_mentions = 1;
    int max_mentions = 2;
    double two_token_frac = 0.15;
    std::uint64_t seed = 0;
};

Dataset make_synthetic_dataset(const SyntheticConfig& cfg);

}  // namespace promet
